#include "covprior/fixtures.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "covprior/errors.hpp"
#include "covprior/rng.hpp"

namespace covprior::oracle {
namespace {

constexpr const char* kVersionTag = "#covprior-fixtures v";

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line, const std::string& field) {
    if (s.empty()) throw ParseError("empty " + field, line);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw ParseError("bad " + field + " '" + s + "'", line);
    return v;
}

}  // namespace

double Fixture::input_double(const std::string& key) const {
    const auto it = inputs.find(key);
    if (it == inputs.end()) throw ParseError("fixture '" + name + "' lacks input '" + key + "'", line);
    return parse_double(it->second, line, "input " + key);
}

long long Fixture::input_int(const std::string& key) const {
    const double v = input_double(key);
    if (v != std::floor(v)) throw ParseError("input '" + key + "' is not an integer", line);
    return static_cast<long long>(v);
}

std::vector<double> Fixture::input_list(const std::string& key) const {
    const auto it = inputs.find(key);
    if (it == inputs.end()) throw ParseError("fixture '" + name + "' lacks input '" + key + "'", line);
    std::vector<double> out;
    for (const auto& part : split(it->second, ',')) out.push_back(parse_double(part, line, "input " + key));
    return out;
}

FixtureFile parse_fixtures(std::istream& in) {
    FixtureFile file;
    std::string raw;
    std::size_t lineno = 0;
    bool saw_version = false;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty()) continue;
        if (raw.rfind(kVersionTag, 0) == 0) {
            const std::string v = raw.substr(std::char_traits<char>::length(kVersionTag));
            file.version = static_cast<int>(parse_double(v, lineno, "version"));
            if (file.version != kFixtureVersion)
                throw ParseError("unsupported fixture version " + v, lineno);
            saw_version = true;
            continue;
        }
        if (raw[0] == '#') continue;
        const auto fields = split(raw, '\t');
        if (fields.size() != 5)
            throw ParseError("expected 5 tab-separated fields, found " + std::to_string(fields.size()), lineno);
        Fixture fx;
        fx.line = lineno;
        fx.name = fields[0];
        if (fx.name.empty()) throw ParseError("empty fixture name", lineno);
        if (!fields[1].empty()) {
            for (const auto& kv : split(fields[1], ';')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos || eq == 0) throw ParseError("bad input '" + kv + "'", lineno);
                fx.inputs[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        }
        fx.value = parse_double(fields[2], lineno, "value");
        fx.error = parse_double(fields[3], lineno, "error");
        if (fx.error < 0.0) throw ParseError("negative error", lineno);
        const std::string& seed = fields[4];
        if (seed.empty() || seed.find_first_not_of("0123456789") != std::string::npos)
            throw ParseError("bad seed '" + seed + "'", lineno);
        errno = 0;
        fx.seed = std::strtoull(seed.c_str(), nullptr, 10);
        if (errno == ERANGE) throw ParseError("seed out of range", lineno);
        file.entries.push_back(std::move(fx));
    }
    if (!saw_version && !file.entries.empty()) file.warnings.push_back("fixture file has no version line; assuming v1");
    if (file.entries.empty()) file.warnings.push_back("fixture file contains no entries");
    return file;
}

FixtureFile read_fixture_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open fixture file '" + path + "'");
    return parse_fixtures(in);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_fixtures(std::ostream& out, const std::vector<Fixture>& entries) {
    out << kVersionTag << kFixtureVersion << '\n';
    out << "# rng " << kRngVersion << '\n';
    out << "# name\tinputs\tvalue\terror\tseed\n";
    for (const auto& fx : entries) {
        out << fx.name << '\t';
        bool first = true;
        for (const auto& [k, v] : fx.inputs) {
            if (!first) out << ';';
            out << k << '=' << v;
            first = false;
        }
        out << '\t' << format_double(fx.value) << '\t' << format_double(fx.error) << '\t' << fx.seed << '\n';
    }
}

}  // namespace covprior::oracle
