#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "irkey/channel.hpp"

namespace irkey {

inline constexpr const char* kTraceHeader = "sensor_row,sensor_col,timestamp_us,voltage_mv";

// Accepted voltage range for ingested samples, in millivolts.
inline constexpr double kMinVoltageMv = -1000.0;
inline constexpr double kMaxVoltageMv = 50000.0;

struct TraceGap {
    int row = 0;
    int col = 0;
    std::int64_t after_us = 0;  // last timestamp before the gap
    std::int64_t missing = 0;   // samples filled by holding the previous value
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::vector<TraceGap> gaps;
    std::size_t padded_tail = 0;  // samples appended to short sensors
    bool reordered = false;       // input was not already sorted
};

void export_traces(const TraceSet& traces, std::ostream& out);
void export_traces(const TraceSet& traces, const std::string& path);
std::string export_traces_string(const TraceSet& traces);

TraceSet parse_traces(const std::string& text, IngestReport* report = nullptr);
TraceSet ingest_traces(const std::string& path, IngestReport* report = nullptr);

}  // namespace irkey
