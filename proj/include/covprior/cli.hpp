#pragma once

// Batch front end: subcommands that run the case studies and sweeps, emit
// CSV or JSON tables, and re-run the shipped oracle fixtures.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "covprior/errors.hpp"
#include "covprior/fixtures.hpp"
#include "covprior/quadrature.hpp"

namespace covprior::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "COVPRIOR_OUTPUT_DIR";
inline constexpr std::uint64_t kDefaultSeed = 20240611;

enum ExitCode : int { kOk = 0, kComputationFailure = 1, kUsage = 2 };

// Bad flags, missing parameters or malformed parameter values.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class Format { Csv, Json };

struct RunConfig {
    std::string subcommand;
    std::map<std::string, std::string> parameters;
    Format format = Format::Csv;
    std::string output_path;  // empty: standard output, or the output directory when the env var is set
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

using Cell = std::variant<double, std::string>;

struct Sheet {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Document {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<Sheet> sheets;
};

/// "min:max:count" (linear) or "log:min:max:count" (geometric).
std::vector<double> parse_grid(const std::string& text);
/// Comma-separated reals.
std::vector<double> parse_list(const std::string& text);

/// RFC-4180 CSV. Metadata lines start with '#'; each sheet has a "# table:" line,
/// a header row and its rows, with a blank line between sheets.
void write_csv(std::ostream& out, const Document& doc);
/// {"metadata": {...}, "tables": {name: {"columns": [...], "data": {column: [...]}}}}
void write_json(std::ostream& out, const Document& doc);

// Oracle fixtures --------------------------------------------------------

/// Re-runs the oracle named by the fixture (quadrature or seeded Monte Carlo).
/// `seed_override` replaces the stored seed of Monte-Carlo entries.
oracle::OracleEstimate run_fixture(const oracle::Fixture& fx, std::optional<std::uint64_t> seed_override = {});
/// Library closed form for the same quantity; the oracle is independent of it.
double fixture_closed_form(const oracle::Fixture& fx);
/// The shipped fixture set, with values computed by the oracles.
std::vector<oracle::Fixture> generate_fixtures(std::uint64_t seed = kDefaultSeed);

struct VerifyEntry {
    std::string name;
    std::size_t line = 0;
    double expected = 0.0;
    double computed = 0.0;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string message;  // oracle failure text, if any
};

struct VerifyReport {
    std::vector<VerifyEntry> entries;
    std::vector<std::string> warnings;

    std::size_t failures() const;
};

/// Tolerance max(3 * max(stored error, recomputed error), 1e-9 |expected|).
VerifyReport verify(const oracle::FixtureFile& file, std::optional<std::uint64_t> seed_override = {});

// Entry point -----------------------------------------------------------

/// Builds the document for a parsed configuration. Throws UsageError or a library error.
Document execute(const RunConfig& config);

/// Full command line handling. Errors go to `err` as a one-line JSON record.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace covprior::cli
