#pragma once

// Result rows and their CSV serialization.

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include "msqa/errors.hpp"
#include "msqa/experiments.hpp"

namespace msqa {

inline constexpr const char* kCsvHeader = "experiment,method,param_name,param_value,metric,p25,p50,p75";

struct CsvRow {
    std::string experiment;
    std::string method;  // "single" | "multi"
    std::string param_name;
    double param_value = 0.0;
    std::string metric;  // "mse" | "bias_ratio"
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;

    friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}

inline std::vector<CsvRow> to_rows(const MetricsTable& table) {
    std::vector<CsvRow> rows;
    const std::string exp = experiment_name(table.experiment);
    const std::string pname = param_name(table.experiment);
    for (const auto& r : table.rows) {
        for (const auto& [method, result] : {std::pair{"single", &r.single}, std::pair{"multi", &r.multi}}) {
            const auto& s = result->summary;
            rows.push_back({exp, method, pname, r.param_value, "mse", s.mse.p25, s.mse.p50, s.mse.p75});
            rows.push_back({exp, method, pname, r.param_value, "bias_ratio", s.bias_ratio.p25, s.bias_ratio.p50,
                            s.bias_ratio.p75});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
        return std::tie(a.experiment, a.param_value, a.method, a.metric) <
               std::tie(b.experiment, b.param_value, b.method, b.metric);
    });
    return rows;
}

inline void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.experiment << ',' << r.method << ',' << r.param_name << ',' << format_double(r.param_value) << ','
            << r.metric << ',' << format_double(r.p25) << ',' << format_double(r.p50) << ',' << format_double(r.p75)
            << '\n';
    }
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

/// Parses a results CSV, validating the header and every row invariant.
inline std::vector<CsvRow> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("missing or wrong CSV header");
    std::vector<CsvRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto f = split(line, ',');
        CsvRow r;
        const auto bad = [&](const std::string& why) {
            return ConfigError("line " + std::to_string(lineno) + ": " + why);
        };
        if (f.size() != 8) throw bad("expected 8 fields");
        r.experiment = f[0];
        r.method = f[1];
        r.param_name = f[2];
        r.metric = f[4];
        if (!parse_double(f[3], r.param_value) || !parse_double(f[5], r.p25) || !parse_double(f[6], r.p50) ||
            !parse_double(f[7], r.p75)) {
            throw bad("malformed number");
        }
        if (r.method != "single" && r.method != "multi") throw bad("unknown method " + r.method);
        if (r.metric != "mse" && r.metric != "bias_ratio") throw bad("unknown metric " + r.metric);
        if (!(r.p25 <= r.p50 && r.p50 <= r.p75)) throw bad("percentiles out of order");
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace msqa
