#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>

#include <json.hpp>

#include "rdgd/engine.hpp"

namespace rdgd {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct TraceHeader {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string mode;
};

/// Columns: t, dist, agg_norm, phi, eta, arrival_bitmask. The final row has
/// only t and dist.
inline void write_trace_csv(std::ostream& out, const Trace& trace, const TraceHeader& h) {
    out << "# seed=" << h.seed << " config_hash=" << h.config_hash;
    if (!h.mode.empty()) out << " mode=" << h.mode;
    out << "\n";
    out << "t,dist,agg_norm,phi,eta,arrival_bitmask\n";
    for (const auto& rec : trace.records) {
        out << rec.t << ',' << format_double(rec.distance);
        if (rec.aggregate) {
            out << ',' << format_double(rec.aggregate_norm) << ',' << format_double(rec.phi) << ','
                << format_double(rec.eta) << ',' << rec.arrival_mask;
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
}

inline nlohmann::json trace_to_json(const Trace& trace, const TraceHeader& h, bool full_vectors) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& rec : trace.records) {
        nlohmann::json row{{"t", rec.t}, {"dist", rec.distance}};
        if (rec.aggregate) {
            row["agg_norm"] = rec.aggregate_norm;
            row["phi"] = rec.phi;
            row["eta"] = rec.eta;
            row["arrival_bitmask"] = rec.arrival_mask;
            if (!rec.cell_sizes.empty()) row["cell_sizes"] = rec.cell_sizes;
            if (full_vectors) row["aggregate"] = to_std(*rec.aggregate);
        }
        if (full_vectors) row["x"] = to_std(rec.x);
        rows.push_back(std::move(row));
    }
    return {{"seed", h.seed},
            {"config_hash", h.config_hash},
            {"mode", h.mode},
            {"target", to_std(trace.target)},
            {"records", std::move(rows)}};
}

}  // namespace rdgd
