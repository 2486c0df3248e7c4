#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace causalkit {

// Rectangular numeric data, row-major. Provenance lines record how the data
// came to be (model, seed, acceptance rate...) and travel with the CSV as
// leading '#' comments. Missing values are NaN and serialize as empty fields.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<double> values;  // rows() * cols(), row-major
  std::vector<std::string> provenance;

  std::size_t cols() const { return columns.size(); }
  std::size_t rows() const {
    return columns.empty() ? 0 : values.size() / columns.size();
  }

  // Column index by name; throws std::out_of_range naming the candidates.
  std::size_t col(std::string_view name) const;

  double at(std::size_t row, std::size_t column) const {
    return values[row * columns.size() + column];
  }
  double& at(std::size_t row, std::size_t column) {
    return values[row * columns.size() + column];
  }

  void append_row(const std::vector<double>& row);  // arity-checked
  Dataset select_rows(const std::vector<std::size_t>& indices) const;
};

std::string to_csv(const Dataset& data);
// Accepts what to_csv writes; also plain CSVs without provenance comments.
// Throws std::invalid_argument with a line number on malformed input.
Dataset from_csv(std::string_view text);

void write_csv_file(const Dataset& data, const std::string& path);
Dataset read_csv_file(const std::string& path);

}  // namespace causalkit
