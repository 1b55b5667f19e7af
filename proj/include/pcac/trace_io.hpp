#pragma once

#include <pcac/common.hpp>
#include <pcac/simulation.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace pcac {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Column-oriented numeric table, the in-memory form of a trace CSV.
struct TraceTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::optional<std::size_t> column(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    }

    double at(std::size_t row, std::size_t col) const { return rows[row][col]; }
};

inline std::vector<std::string> trace_header(const SimulationTrace& trace)
{
    std::vector<std::string> h{"k", "t"};
    for (const auto& l : trace.loops) {
        for (int j = 0; j < l.tracked; ++j) {
            h.push_back("r_" + l.name + "_" + std::to_string(j));
        }
    }
    for (const auto& name : trace.output_names) {
        h.push_back("y_" + name);
    }
    for (const auto& l : trace.loops) {
        for (int j = 0; j < l.tracked; ++j) {
            h.push_back("yt_" + l.name + "_" + std::to_string(j));
        }
    }
    for (const char* prefix : {"u_req_", "u_"}) {
        for (const auto& l : trace.loops) {
            for (const auto& in : l.input_names) {
                h.push_back(prefix + in);
            }
        }
    }
    for (const char* prefix : {"beta_", "qp_iter_", "qp_cost_"}) {
        for (const auto& l : trace.loops) {
            h.push_back(prefix + l.name);
        }
    }
    return h;
}

inline void write_trace_csv(const SimulationTrace& trace, std::ostream& os)
{
    const auto header = trace_header(trace);
    for (std::size_t i = 0; i < header.size(); ++i) {
        os << (i ? "," : "") << header[i];
    }
    os << '\n';
    std::string line;
    auto put = [&line](const std::string& s) {
        line += ',';
        line += s;
    };
    auto put_vec = [&](const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            put(format_double(v(i)));
        }
    };
    for (const auto& s : trace.steps) {
        line = std::to_string(s.k);
        put(format_double(s.t));
        for (const auto& l : s.loops) {
            put_vec(l.r);
        }
        put_vec(s.y);
        for (const auto& l : s.loops) {
            put_vec(l.yt);
        }
        for (const auto& l : s.loops) {
            put_vec(l.u_req);
        }
        for (const auto& l : s.loops) {
            put_vec(l.u);
        }
        for (const auto& l : s.loops) {
            put(format_double(l.beta));
        }
        for (const auto& l : s.loops) {
            put(std::to_string(l.qp_iterations));
        }
        for (const auto& l : s.loops) {
            put(format_double(l.qp_cost));
        }
        os << line << '\n';
    }
    if (!os) {
        throw std::runtime_error("write_trace_csv: write failed");
    }
}

inline std::string trace_csv(const SimulationTrace& trace)
{
    std::ostringstream os;
    write_trace_csv(trace, os);
    return os.str();
}

inline TraceTable read_trace_csv(std::istream& is)
{
    TraceTable table;
    std::string line;
    if (!std::getline(is, line) || line.empty()) {
        throw ConfigError("read_trace_csv: missing header");
    }
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            table.header.push_back(cell);
        }
    }
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        row.reserve(table.header.size());
        const char* p = line.data();
        const char* end = p + line.size();
        while (true) {
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{}) {
                throw ConfigError("read_trace_csv: bad number on line " + std::to_string(lineno));
            }
            row.push_back(v);
            p = res.ptr;
            if (p == end) {
                break;
            }
            if (*p != ',') {
                throw ConfigError("read_trace_csv: bad separator on line " + std::to_string(lineno));
            }
            ++p;
        }
        if (row.size() != table.header.size()) {
            throw ConfigError("read_trace_csv: line " + std::to_string(lineno) + " has " +
                              std::to_string(row.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline TraceTable trace_table(const SimulationTrace& trace)
{
    std::istringstream is(trace_csv(trace));
    return read_trace_csv(is);
}

struct LoopMetrics {
    std::string name;
    double cumulative_cost = 0.0;
    double rms_error = 0.0;
    double transient_duration = 0.0; // s
};

struct Metrics {
    std::size_t steps = 0;
    double duration = 0.0;
    double cumulative_cost = 0.0;
    std::optional<double> constraint_margin; // smallest slack to any bound; needs limits
    std::vector<LoopMetrics> loops;
};

/// Per-loop limits and input names, needed for the constraint margin.
struct LoopLimits {
    std::string name;
    std::vector<std::string> input_names;
    SaturationLimits limits;
};

/**
 * Tracking error e_k = yt_k - r_k per loop.
 * cumulative_cost: Σ_k ‖e_k‖₂.  rms_error: sqrt(mean_k ‖e_k‖₂²).
 * transient_duration: earliest t after which ‖e‖∞ stays within
 * 5% of max(1, command span); the run length if it never settles.
 * constraint_margin: min over steps, channels and bounds of the slack of u.
 */
inline Metrics compute_metrics(const TraceTable& table, const std::vector<LoopLimits>& limits = {})
{
    if (table.rows.empty()) {
        throw ConfigError("compute_metrics: empty trace");
    }
    const auto need = [&table](const std::string& name) {
        const auto c = table.column(name);
        if (!c) {
            throw ConfigError("compute_metrics: missing column '" + name + "'");
        }
        return *c;
    };
    const std::size_t tcol = need("t");
    const std::size_t n = table.rows.size();

    Metrics m;
    m.steps = n;
    const double dt = n > 1 ? table.at(1, tcol) - table.at(0, tcol) : 0.0;
    m.duration = table.at(n - 1, tcol) - table.at(0, tcol) + dt;

    std::vector<std::string> loop_names;
    for (const auto& h : table.header) {
        if (h.rfind("beta_", 0) == 0) {
            loop_names.push_back(h.substr(5));
        }
    }
    for (const auto& name : loop_names) {
        std::vector<std::pair<std::size_t, std::size_t>> cols;
        for (int j = 0;; ++j) {
            const auto r = table.column("r_" + name + "_" + std::to_string(j));
            if (!r) {
                break;
            }
            cols.emplace_back(*r, need("yt_" + name + "_" + std::to_string(j)));
        }
        double span = 0.0;
        for (const auto& [rc, _] : cols) {
            double lo = table.at(0, rc);
            double hi = lo;
            for (std::size_t k = 0; k < n; ++k) {
                lo = std::min(lo, table.at(k, rc));
                hi = std::max(hi, table.at(k, rc));
            }
            span = std::max(span, hi - lo);
        }
        const double threshold = 0.05 * std::max(1.0, span);

        LoopMetrics lm;
        lm.name = name;
        double sq = 0.0;
        std::optional<std::size_t> settled;
        for (std::size_t k = 0; k < n; ++k) {
            double e2 = 0.0;
            double einf = 0.0;
            for (const auto& [rc, yc] : cols) {
                const double e = table.at(k, yc) - table.at(k, rc);
                e2 += e * e;
                einf = std::max(einf, std::abs(e));
            }
            lm.cumulative_cost += std::sqrt(e2);
            sq += e2;
            if (einf > threshold) {
                settled.reset();
            } else if (!settled) {
                settled = k;
            }
        }
        lm.rms_error = std::sqrt(sq / static_cast<double>(n));
        lm.transient_duration =
            settled ? table.at(*settled, tcol) - table.at(0, tcol) : m.duration;
        m.cumulative_cost += lm.cumulative_cost;
        m.loops.push_back(std::move(lm));
    }

    if (!limits.empty()) {
        double margin = std::numeric_limits<double>::infinity();
        for (const auto& l : limits) {
            for (std::size_t i = 0; i < l.input_names.size(); ++i) {
                const auto c = need("u_" + l.input_names[i]);
                const auto ii = static_cast<Eigen::Index>(i);
                double prev = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double u = table.at(k, c);
                    const double move = u - prev;
                    margin = std::min({margin, u - l.limits.u_min(ii), l.limits.u_max(ii) - u,
                                       move - l.limits.du_min(ii), l.limits.du_max(ii) - move});
                    prev = u;
                }
            }
        }
        m.constraint_margin = margin;
    }
    return m;
}

inline std::vector<LoopLimits> trace_limits(const SimulationTrace& trace)
{
    std::vector<LoopLimits> out;
    for (const auto& l : trace.loops) {
        out.push_back({l.name, l.input_names, l.limits});
    }
    return out;
}

inline Metrics compute_metrics(const SimulationTrace& trace)
{
    return compute_metrics(trace_table(trace), trace_limits(trace));
}

inline std::string metrics_json(const Metrics& m)
{
    nlohmann::ordered_json j;
    j["steps"] = m.steps;
    j["duration"] = m.duration;
    j["cumulative_cost"] = m.cumulative_cost;
    j["constraint_margin"] = m.constraint_margin ? nlohmann::ordered_json(*m.constraint_margin) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json loops = nlohmann::ordered_json::array();
    for (const auto& l : m.loops) {
        loops.push_back({{"name", l.name},
                         {"cumulative_cost", l.cumulative_cost},
                         {"rms_error", l.rms_error},
                         {"transient_duration", l.transient_duration}});
    }
    j["loops"] = loops;
    return j.dump(2) + "\n";
}

} // namespace pcac
