#pragma once

#include <string>
#include <vector>

namespace skeltk {

// One row of a published per-class accuracy table: the accuracy of a class
// under the original skeleton input and under the displacement transform.
struct FixtureRow {
  int class_id = 0;  // 1-based NTU action id
  std::string name;
  double original = 0.0;
  double transformed = 0.0;
};

// CSV columns: class_id,name,original,transformed. Lines starting with '#'
// are comments. Every row's name must match the canonical action label for
// its id; mismatches are errors, never guessed around.
std::vector<FixtureRow> parse_fixture_csv(const std::string& text);
std::vector<FixtureRow> load_fixture_csv(const std::string& path);

// Expands fixture rows into dense per-class accuracy arrays of length
// `num_classes` (zero-based ids), leaving absent classes at `fill`.
void fixture_accuracies(const std::vector<FixtureRow>& rows, int num_classes,
                        std::vector<double>& original,
                        std::vector<double>& transformed, double fill = 0.0);

}  // namespace skeltk
