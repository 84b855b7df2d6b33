#include "skeltk/fixtures.hpp"

#include <fstream>
#include <sstream>

#include "skeltk/error.hpp"
#include "skeltk/ntu_actions.hpp"

namespace skeltk {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_field(const std::string& text, size_t line_no, const char* what) {
  try {
    size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("fixture line " + std::to_string(line_no) + ": bad " +
                     what + " \"" + text + "\"");
  }
}

}  // namespace

std::vector<FixtureRow> parse_fixture_csv(const std::string& text) {
  std::vector<FixtureRow> rows;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 4)
      throw ParseError("fixture line " + std::to_string(line_no) + ": expected " +
                       "4 fields, got " + std::to_string(fields.size()));
    FixtureRow row;
    row.class_id =
        static_cast<int>(parse_field(fields[0], line_no, "class id"));
    row.name = fields[1];
    row.original = parse_field(fields[2], line_no, "accuracy");
    row.transformed = parse_field(fields[3], line_no, "accuracy");

    const auto& names = ntu_action_names();
    if (row.class_id < 1 || static_cast<size_t>(row.class_id) > names.size())
      throw ParseError("fixture line " + std::to_string(line_no) + ": class id " +
                       std::to_string(row.class_id) + " outside [1, " +
                       std::to_string(names.size()) + "]");
    const std::string& expected = names[row.class_id - 1];
    if (row.name != expected)
      throw ParseError("fixture line " + std::to_string(line_no) + ": name \"" +
                       row.name + "\" does not match action " +
                       std::to_string(row.class_id) + " (\"" + expected + "\")");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FixtureRow> load_fixture_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open fixture \"" + path + "\"");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_fixture_csv(text);
}

void fixture_accuracies(const std::vector<FixtureRow>& rows, int num_classes,
                        std::vector<double>& original,
                        std::vector<double>& transformed, double fill) {
  original.assign(static_cast<size_t>(num_classes), fill);
  transformed.assign(static_cast<size_t>(num_classes), fill);
  for (const FixtureRow& row : rows) {
    if (row.class_id < 1 || row.class_id > num_classes)
      throw ValidationError("fixture class id " + std::to_string(row.class_id) +
                            " outside [1, " + std::to_string(num_classes) + "]");
    original[row.class_id - 1] = row.original;
    transformed[row.class_id - 1] = row.transformed;
  }
}

}  // namespace skeltk
