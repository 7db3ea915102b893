#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace imbeval::csv {

// Minimal CSV layer shared by all wire formats. Fields must not contain
// commas or newlines; identifiers in this toolkit never do.
using Row = std::vector<std::string>;

std::vector<Row> read_file(const std::string& path);

// Writes content to a temp file in the same directory, then renames it onto
// path so readers never observe a partial file.
void atomic_write(const std::string& path, const std::string& content);

// Probabilities and metric values travel as decimal text with 9 significant
// digits; model parameters use 17 so they reload bit-exactly.
std::string fmt_g9(double v);
std::string fmt_g17(double v);

long long parse_int(const std::string& field, const std::string& context);
double parse_double(const std::string& field, const std::string& context);

std::string join(const Row& fields);

}  // namespace imbeval::csv
