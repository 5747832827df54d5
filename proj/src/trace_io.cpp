#include "irkey/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "irkey/errors.hpp"

namespace irkey {

namespace {

void append_int(std::string& out, std::int64_t v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

void append_mv(std::string& out, float volts) {
    double mv = static_cast<double>(volts) * 1000.0;
    double rounded = std::round(mv);
    if (std::abs(mv - rounded) < 1e-6) {
        append_int(out, static_cast<std::int64_t>(rounded));
        return;
    }
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, mv);
    out.append(buf, r.ptr);
}

struct Row {
    int row;
    int col;
    std::int64_t ts;
    double mv;
    std::size_t line;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t c = line.find(',', pos);
        out.push_back(trim(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
        if (c == std::string_view::npos) break;
        pos = c + 1;
    }
    return out;
}

template <class T>
T parse_num(std::string_view s, std::size_t line, const char* field) {
    T v{};
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ParseError(line, std::string("bad ") + field + " '" + std::string(s) + "'");
    return v;
}

}  // namespace

std::string export_traces_string(const TraceSet& traces) {
    std::string out;
    out.reserve(traces.traces.size() * traces.samples() * 18 + 64);
    out += kTraceHeader;
    out += '\n';
    for (const IRTrace& t : traces.traces) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            append_int(out, t.row);
            out += ',';
            append_int(out, t.col);
            out += ',';
            append_int(out, t.timestamp_us(i));
            out += ',';
            append_mv(out, t.volts[i]);
            out += '\n';
        }
    }
    return out;
}

void export_traces(const TraceSet& traces, std::ostream& out) {
    std::string s = export_traces_string(traces);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void export_traces(const TraceSet& traces, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    export_traces(traces, f);
    if (!f) throw Error("write failed: " + path);
}

TraceSet parse_traces(const std::string& text, IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep = IngestReport{};

    std::string_view all(text);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= all.size()) return false;
        std::size_t e = all.find('\n', pos);
        if (e == std::string_view::npos) e = all.size();
        line = all.substr(pos, e - pos);
        pos = e + 1;
        ++line_no;
        return true;
    };

    std::string_view line;
    if (!next_line(line)) throw SchemaError("empty trace file; missing columns: sensor_row, sensor_col, timestamp_us, voltage_mv");
    auto header = split(line);
    const char* names[4] = {"sensor_row", "sensor_col", "timestamp_us", "voltage_mv"};
    int idx[4] = {-1, -1, -1, -1};
    for (std::size_t i = 0; i < header.size(); ++i)
        for (int k = 0; k < 4; ++k)
            if (header[i] == names[k]) idx[k] = static_cast<int>(i);
    std::string missing;
    for (int k = 0; k < 4; ++k)
        if (idx[k] < 0) missing += (missing.empty() ? "" : ", ") + std::string(names[k]);
    if (!missing.empty()) throw SchemaError("missing columns: " + missing);

    std::vector<Row> rows;
    rows.reserve(text.size() / 16);
    while (next_line(line)) {
        if (trim(line).empty()) continue;
        auto f = split(line);
        if (f.size() != header.size())
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        Row r{};
        r.line = line_no;
        r.row = parse_num<int>(f[static_cast<std::size_t>(idx[0])], line_no, "sensor_row");
        r.col = parse_num<int>(f[static_cast<std::size_t>(idx[1])], line_no, "sensor_col");
        r.ts = parse_num<std::int64_t>(f[static_cast<std::size_t>(idx[2])], line_no, "timestamp_us");
        r.mv = parse_num<double>(f[static_cast<std::size_t>(idx[3])], line_no, "voltage_mv");
        if (r.row < 0 || r.col < 0) throw ParseError(line_no, "negative sensor index");
        if (r.ts < 0) throw ParseError(line_no, "negative timestamp");
        if (!std::isfinite(r.mv) || r.mv < kMinVoltageMv || r.mv > kMaxVoltageMv)
            throw ParseError(line_no, "voltage out of bounds");
        rows.push_back(r);
    }
    rep.rows_read = rows.size();
    if (rows.empty()) throw SchemaError("trace file has no samples");

    auto key_less = [](const Row& a, const Row& b) {
        if (a.row != b.row) return a.row < b.row;
        if (a.col != b.col) return a.col < b.col;
        return a.ts < b.ts;
    };
    if (!std::is_sorted(rows.begin(), rows.end(), key_less)) {
        rep.reordered = true;
        std::stable_sort(rows.begin(), rows.end(), key_less);
    }

    // Group per sensor; find a common sampling step.
    struct Span { std::size_t begin, end; };
    std::map<std::pair<int, int>, Span> sensors;
    std::int64_t step = 0;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i + 1;
        while (j < rows.size() && rows[j].row == rows[i].row && rows[j].col == rows[i].col) {
            std::int64_t d = rows[j].ts - rows[j - 1].ts;
            if (d <= 0)
                throw NonMonotoneTimestamps("sensor (" + std::to_string(rows[i].row) + "," + std::to_string(rows[i].col) +
                                            ") timestamp " + std::to_string(rows[j].ts) + " at line " +
                                            std::to_string(rows[j].line) + " does not increase");
            step = step == 0 ? d : std::min(step, d);
            ++j;
        }
        sensors[{rows[i].row, rows[i].col}] = {i, j};
        i = j;
    }
    if (step == 0) step = 1;

    int n_rows = 0, n_cols = 0;
    for (const auto& [rc, sp] : sensors) {
        n_rows = std::max(n_rows, rc.first + 1);
        n_cols = std::max(n_cols, rc.second + 1);
    }
    if (sensors.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols)) {
        std::string miss;
        for (int r = 0; r < n_rows; ++r)
            for (int c = 0; c < n_cols; ++c)
                if (!sensors.count({r, c})) miss += (miss.empty() ? "" : " ") + std::to_string(r) + "," + std::to_string(c);
        throw SchemaError("missing sensors: " + miss);
    }

    std::int64_t start = rows[sensors.begin()->second.begin].ts;
    TraceSet out;
    out.rows = n_rows;
    out.cols = n_cols;
    out.traces.reserve(sensors.size());
    std::size_t longest = 0;
    for (const auto& [rc, sp] : sensors) {
        if (rows[sp.begin].ts != start)
            throw SchemaError("sensor (" + std::to_string(rc.first) + "," + std::to_string(rc.second) +
                              ") starts at " + std::to_string(rows[sp.begin].ts) + " us, expected " + std::to_string(start));
        IRTrace t;
        t.row = rc.first;
        t.col = rc.second;
        t.start_us = start;
        t.step_us = step;
        t.volts.reserve(sp.end - sp.begin);
        for (std::size_t k = sp.begin; k < sp.end; ++k) {
            if (k > sp.begin) {
                std::int64_t d = rows[k].ts - rows[k - 1].ts;
                if (d % step != 0)
                    throw SchemaError("irregular sampling at line " + std::to_string(rows[k].line));
                if (d > step) {
                    std::int64_t miss = d / step - 1;
                    rep.gaps.push_back({rc.first, rc.second, rows[k - 1].ts, miss});
                    t.volts.insert(t.volts.end(), static_cast<std::size_t>(miss), t.volts.back());
                }
            }
            t.volts.push_back(static_cast<float>(rows[k].mv / 1000.0));
        }
        longest = std::max(longest, t.volts.size());
        out.traces.push_back(std::move(t));
    }
    for (IRTrace& t : out.traces) {
        if (t.volts.size() < longest) {
            rep.padded_tail += longest - t.volts.size();
            t.volts.resize(longest, t.volts.back());
        }
    }
    return out;
}

TraceSet ingest_traces(const std::string& path, IngestReport* report) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_traces(ss.str(), report);
}

}  // namespace irkey
