#include "causalkit/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "causalkit/dsl.hpp"  // format_double

namespace causalkit {

std::size_t Dataset::col(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  std::string have;
  for (const auto& c : columns) have += (have.empty() ? "" : ", ") + c;
  throw std::out_of_range("no column '" + std::string(name) +
                          "' (columns: " + have + ")");
}

void Dataset::append_row(const std::vector<double>& row) {
  if (row.size() != columns.size()) {
    throw std::invalid_argument(
        "row arity " + std::to_string(row.size()) + " does not match " +
        std::to_string(columns.size()) + " columns");
  }
  values.insert(values.end(), row.begin(), row.end());
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.columns = columns;
  out.provenance = provenance;
  out.values.reserve(indices.size() * cols());
  for (std::size_t r : indices) {
    for (std::size_t c = 0; c < cols(); ++c) {
      out.values.push_back(at(r, c));
    }
  }
  return out;
}

std::string to_csv(const Dataset& data) {
  std::ostringstream out;
  for (const auto& line : data.provenance) out << "# " << line << "\n";
  for (std::size_t c = 0; c < data.cols(); ++c) {
    out << (c ? "," : "") << data.columns[c];
  }
  out << "\n";
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) {
      if (c) out << ",";
      double v = data.at(r, c);
      if (!std::isnan(v)) out << format_double(v);  // NaN -> empty field
    }
    out << "\n";
  }
  return out.str();
}

Dataset from_csv(std::string_view text) {
  Dataset data;
  std::size_t pos = 0;
  int line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    line_no++;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t start = line.size() > 1 && line[1] == ' ' ? 2 : 1;
      data.provenance.emplace_back(line.substr(start));
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t fpos = 0;
    while (true) {
      std::size_t comma = line.find(',', fpos);
      fields.push_back(line.substr(
          fpos, comma == std::string_view::npos ? comma : comma - fpos));
      if (comma == std::string_view::npos) break;
      fpos = comma + 1;
    }
    if (!header_seen) {
      for (auto f : fields) data.columns.emplace_back(f);
      header_seen = true;
      continue;
    }
    if (fields.size() != data.columns.size()) {
      throw std::invalid_argument(
          "csv line " + std::to_string(line_no) + " has " +
          std::to_string(fields.size()) + " fields, header has " +
          std::to_string(data.columns.size()));
    }
    for (auto f : fields) {
      if (f.empty()) {
        data.values.push_back(std::nan(""));
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw std::invalid_argument("csv line " + std::to_string(line_no) +
                                    ": cannot parse '" + std::string(f) +
                                    "' as a number");
      }
      data.values.push_back(v);
    }
  }
  if (!header_seen) {
    throw std::invalid_argument("csv has no header row");
  }
  return data;
}

void write_csv_file(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << to_csv(data);
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_csv(buf.str());
}

}  // namespace causalkit
