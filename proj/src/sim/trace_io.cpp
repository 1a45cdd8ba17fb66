#include "leakdetect/sim/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "leakdetect/error.hpp"

namespace leakdetect::sim {

namespace {

constexpr const char* kHeader = "t,p1,p2,x,u,label";

std::string format_real(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line)
{
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw Error(ErrorCode::data, "trace csv line " + std::to_string(line) + ": bad field '" +
                                         std::string(field) + "'");
    return value;
}

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace)
{
    trace.validate();
    const int label = static_cast<int>(trace.label);
    out << kHeader << '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << format_real(trace.t[i]) << ',' << format_real(trace.p1[i]) << ',' << format_real(trace.p2[i])
            << ',' << format_real(trace.x[i]) << ',' << trace.u[i] << ',' << label << '\n';
    }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    write_trace_csv(out, trace);
    if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

Trace read_trace_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::data, "trace csv is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) throw Error(ErrorCode::data, "trace csv header must be '" + std::string(kHeader) + "'");

    Trace trace;
    int label = -1;
    std::size_t lineno = 1;
    std::vector<std::string_view> fields;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        fields.clear();
        std::string_view rest(line);
        for (std::size_t comma; (comma = rest.find(',')) != std::string_view::npos;) {
            fields.push_back(rest.substr(0, comma));
            rest.remove_prefix(comma + 1);
        }
        fields.push_back(rest);
        if (fields.size() != 6)
            throw Error(ErrorCode::data, "trace csv line " + std::to_string(lineno) + ": expected 6 fields");

        trace.t.push_back(parse_field<double>(fields[0], lineno));
        trace.p1.push_back(parse_field<double>(fields[1], lineno));
        trace.p2.push_back(parse_field<double>(fields[2], lineno));
        trace.x.push_back(parse_field<double>(fields[3], lineno));
        trace.u.push_back(parse_field<int>(fields[4], lineno));
        const int row_label = parse_field<int>(fields[5], lineno);
        if (label < 0) label = row_label;
        if (row_label != label)
            throw Error(ErrorCode::data, "trace csv line " + std::to_string(lineno) + ": label changes mid-trace");
    }
    if (trace.t.empty()) throw Error(ErrorCode::data, "trace csv has no samples");
    trace.label = leak_class_from_int(label);
    trace.validate();
    return trace;
}

Trace read_trace_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    return read_trace_csv(in);
}

}  // namespace leakdetect::sim
