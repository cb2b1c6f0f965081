#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "coipss/errors.hpp"
#include "coipss/response.hpp"
#include "coipss/simulation.hpp"

namespace coipss {

/// Writes columns with full double precision so identical runs produce
/// byte-identical files.
inline void write_csv(const std::string& path,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& data) {
    if (columns.size() != data.size())
        throw InputError("csv: column names and data size mismatch");
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    for (std::size_t c = 0; c < columns.size(); ++c)
        out << (c ? "," : "") << columns[c];
    out << "\n";
    const std::size_t rows = data.empty() ? 0 : data[0].size();
    char buf[40];
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < data.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", data[c][r]);
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
}

inline void write_record_csv(const std::string& path, const SimulationRecord& rec) {
    write_csv(path, rec.columns, rec.data);
}

/// Frequency-response table: freq_hz, gain_db, phase_deg.
inline void write_response_csv(const std::string& path,
                               const std::vector<ResponsePoint>& points) {
    std::vector<std::vector<double>> cols(3);
    for (const auto& p : points) {
        cols[0].push_back(p.omega_rad / (2.0 * kPi));
        cols[1].push_back(p.gain_db);
        cols[2].push_back(p.phase_deg);
    }
    write_csv(path, {"freq_hz", "gain_db", "phase_deg"}, cols);
}

inline void write_audit_csv(const std::string& path,
                            const std::vector<ChannelAuditEntry>& audit) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << "sensor_id,seq,sample_time,delivery_time,dropped\n";
    char buf[128];
    for (const auto& e : audit) {
        std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%d\n", e.sensor_id,
                      static_cast<long long>(e.seq), e.sample_time,
                      e.dropped ? 0.0 : e.delivery_time, e.dropped ? 1 : 0);
        out << buf;
    }
}

}  // namespace coipss
