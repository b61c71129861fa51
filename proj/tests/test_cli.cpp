#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "covprior/cli.hpp"
#include "covprior/fixtures.hpp"
#include "doctest.h"

using namespace covprior;
using namespace covprior::cli;

namespace {

const std::string kFixtures = std::string(COVPRIOR_SOURCE_DIR) + "/data/oracle_fixtures.txt";

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "covprior");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("covprior_test_" + name)).string();
}

}  // namespace

TEST_CASE("grid syntax") {
    const auto g = parse_grid("0:1:5");
    REQUIRE(g.size() == 5);
    CHECK(g[1] == 0.25);
    CHECK(g.back() == 1.0);
    const auto l = parse_grid("log:0.01:100:5");
    CHECK(l[2] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(l.back() == 100.0);
    CHECK(parse_grid("3:3:1") == std::vector<double>{3.0});
    CHECK_THROWS_AS(parse_grid("0:1"), UsageError);
    CHECK_THROWS_AS(parse_grid("log:0:1:4"), UsageError);
    CHECK_THROWS_AS(parse_grid("1:0:4"), UsageError);
    CHECK_THROWS_AS(parse_grid("0:1:2.5"), UsageError);
    CHECK_THROWS_AS(parse_list("1,x"), UsageError);
    CHECK(parse_list("2, 1,5") == std::vector<double>{2, 1, 5});
}

TEST_CASE("CSV and JSON writers") {
    Document doc;
    doc.metadata = {{"k", "v"}};
    doc.sheets.push_back({"t", {"a", "b"}, {{1.0 / 3.0, std::string("x,\"y\"")}}});
    std::ostringstream csv;
    write_csv(csv, doc);
    CHECK(csv.str() == "# k: v\n# table: t\na,b\r\n0.33333333333333331,\"x,\"\"y\"\"\"\r\n");
    std::ostringstream js;
    write_json(js, doc);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["metadata"]["k"] == "v");
    CHECK(j["tables"]["t"]["data"]["a"][0].get<double>() == 1.0 / 3.0);
    CHECK(j["tables"]["t"]["columns"].size() == 2);
}

TEST_CASE("table-producing subcommands") {
    auto g = invoke({"--deterministic", "gauss-stdmean", "--n-min", "2", "--n-max", "25"});
    REQUIRE(g.code == 0);
    CHECK(g.out.find("\n2,0.25") != std::string::npos);
    CHECK(g.out.find("timestamp") == std::string::npos);

    auto mn = invoke({"--format", "json", "multinomial", "--counts", "2,1,5", "--m-max", "100"});
    REQUIRE(mn.code == 0);
    const auto j = nlohmann::json::parse(mn.out);
    CHECK(j["tables"]["models"]["data"]["m"].size() == 98);
    CHECK(j["metadata"].contains("timestamp"));

    auto ns = invoke({"--format", "json", "neyman-scott", "--m", "25", "--s2", "1", "--zeta0-grid", "0.01:8:400"});
    REQUIRE(ns.code == 0);
    const auto k = nlohmann::json::parse(ns.out);
    const auto& z = k["tables"]["zeta0"]["data"]["zeta0"];
    const auto& d = k["tables"]["zeta0"]["data"]["density"];
    std::size_t best = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i].get<double>() > d[best].get<double>()) best = i;
    CHECK(z[best].get<double>() > 1.6);
    CHECK(z[best].get<double>() < 2.4);

    CHECK(invoke({"stein", "--x", "1,2,3", "--sx-grid", "0.1:5:5"}).code == 0);
    CHECK(invoke({"multinormal", "--m", "3", "--n", "4", "--q", "2"}).code == 0);
    CHECK(invoke({"fisher", "--model", "bernoulli", "--grid", "0.2:0.8:4"}).code == 0);
    CHECK(invoke({"marginalization", "--m", "6"}).code == 0);
}

TEST_CASE("exit codes and error records") {
    auto missing = invoke({"multinomial", "--counts", "2,1,5"});
    CHECK(missing.code == kUsage);
    const auto rec = nlohmann::json::parse(missing.err);
    CHECK(rec["error"]["kind"] == "usage");
    CHECK(rec["error"]["exit_code"] == 2);

    CHECK(invoke({}).code == kUsage);
    CHECK(invoke({"no-such-command"}).code == kUsage);
    CHECK(invoke({"fisher", "--model", "nope", "--at", "1"}).code == kUsage);
    CHECK(invoke({"neyman-scott", "--m", "x"}).code == kUsage);
    CHECK(invoke({"--format", "xml", "marginalization", "--m", "6"}).code == kUsage);

    // Moments that do not exist are a computation failure.
    auto undefined = invoke({"neyman-scott", "--m", "2"});
    CHECK(undefined.code == kComputationFailure);
    CHECK(nlohmann::json::parse(undefined.err)["error"]["kind"] == "computation");
    CHECK(invoke({"multinomial", "--counts", "2,1,5", "--m-max", "2"}).code == kComputationFailure);

    CHECK(invoke({"--help"}).code == kOk);
    CHECK(invoke({"--version"}).out.find(kVersion) != std::string::npos);
}

TEST_CASE("deterministic output files") {
    const std::string a = temp_path("a.csv"), b = temp_path("b.csv");
    REQUIRE(invoke({"--deterministic", "--seed", "7", "-o", a, "stein", "--x", "0.3,1.1,-0.4"}).code == 0);
    REQUIRE(invoke({"--deterministic", "--seed", "7", "-o", b, "stein", "--x", "0.3,1.1,-0.4"}).code == 0);
    std::ifstream fa(a), fb(b);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(!sa.str().empty());
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().find("# seed: 7") != std::string::npos);
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST_CASE("verify the shipped fixtures") {
    const auto file = oracle::read_fixture_file(kFixtures);
    REQUIRE(file.entries.size() > 20);
    const auto rep = verify(file);
    CHECK(rep.failures() == 0);
    for (const auto& e : rep.entries) {
        CAPTURE(e.name);
        CAPTURE(e.line);
        CHECK(e.pass);
    }
    auto r1 = invoke({"--deterministic", "verify", kFixtures});
    auto r2 = invoke({"--deterministic", "verify", kFixtures});
    CHECK(r1.code == 0);
    CHECK(r1.out == r2.out);
}

TEST_CASE("fixture oracles agree with the closed forms") {
    for (const auto& fx : oracle::read_fixture_file(kFixtures).entries) {
        const double closed = fixture_closed_form(fx);
        CAPTURE(fx.name);
        CAPTURE(fx.line);
        CHECK(std::fabs(fx.value - closed) <= std::max(3.0 * fx.error, 1e-7 * std::fabs(closed)));
    }
}

TEST_CASE("verify reports a perturbed entry") {
    auto file = oracle::read_fixture_file(kFixtures);
    file.entries[3].value *= 1.1;
    const auto rep = verify(file);
    CHECK(rep.failures() == 1);
    CHECK_FALSE(rep.entries[3].pass);

    const std::string path = temp_path("perturbed.txt");
    {
        std::ofstream out(path);
        oracle::write_fixtures(out, file.entries);
    }
    auto r = invoke({"verify", path});
    CHECK(r.code == kComputationFailure);
    CHECK(r.out.find(",fail,") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_CASE("verify edge cases") {
    const std::string empty = temp_path("empty.txt");
    {
        std::ofstream out(empty);
        out << "#covprior-fixtures v1\n";
    }
    auto e = invoke({"verify", empty});
    CHECK(e.code == kOk);
    CHECK(e.err.find("warning") != std::string::npos);

    const std::string bad = temp_path("bad.txt");
    {
        std::ofstream out(bad);
        out << "#covprior-fixtures v1\ncredible_ball\tq=1;mn=12\t0.7\t0\t0\nnot a record\n";
    }
    auto b = invoke({"verify", bad});
    CHECK(b.code == kUsage);
    CHECK(b.err.find("line 3") != std::string::npos);
    std::filesystem::remove(empty);
    std::filesystem::remove(bad);

    CHECK(invoke({"verify"}).code == kUsage);
}
