#pragma once

// Oracle fixture files: one tab-separated record per line,
//   name <TAB> inputs <TAB> value <TAB> error <TAB> seed
// where inputs is "key=value;key=value". Lines starting with '#' are
// comments, except the optional version line "#covprior-fixtures v1".

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace covprior::oracle {

inline constexpr int kFixtureVersion = 1;

struct Fixture {
    std::string name;
    std::map<std::string, std::string> inputs;
    double value = 0.0;
    double error = 0.0;
    std::uint64_t seed = 0;
    std::size_t line = 0;

    double input_double(const std::string& key) const;
    long long input_int(const std::string& key) const;
    std::vector<double> input_list(const std::string& key) const;
};

struct FixtureFile {
    int version = kFixtureVersion;
    std::vector<Fixture> entries;
    std::vector<std::string> warnings;
};

/// Throws ParseError (with the offending line number) on malformed input.
FixtureFile parse_fixtures(std::istream& in);
FixtureFile read_fixture_file(const std::string& path);

void write_fixtures(std::ostream& out, const std::vector<Fixture>& entries);

std::string format_double(double v);

}  // namespace covprior::oracle
