#include "imbeval/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imbeval/error.hpp"

namespace imbeval::csv {

std::vector<Row> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open '" + path + "' for reading");
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row fields;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    if (in.bad()) raise(Errc::io_error, "read failure on '" + path + "'");
    return rows;
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(Errc::io_error, "cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) raise(Errc::io_error, "write failure on '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) raise(Errc::io_error, "cannot rename '" + tmp.string() + "' to '" + path +
                                      "': " + ec.message());
}

std::string fmt_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

long long parse_int(const std::string& field, const std::string& context) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(field.c_str(), &end, 10);
    if (errno != 0 || end == field.c_str() || *end != '\0')
        raise(Errc::invalid_field, "expected integer for " + context + ", got '" + field + "'");
    return v;
}

double parse_double(const std::string& field, const std::string& context) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(field.c_str(), &end);
    if (errno != 0 || end == field.c_str() || *end != '\0')
        raise(Errc::invalid_field, "expected number for " + context + ", got '" + field + "'");
    return v;
}

std::string join(const Row& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

}  // namespace imbeval::csv
