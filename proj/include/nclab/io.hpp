#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nclab {

// Labels: one non-negative class index per line.
std::vector<int> read_labels(std::istream& in);
void write_labels(std::ostream& out, const std::vector<int>& labels);
std::vector<int> load_labels(const std::string& path);
void save_labels(const std::string& path, const std::vector<int>& labels);

}  // namespace nclab
