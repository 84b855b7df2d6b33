#pragma once

#include <string>
#include <vector>

namespace skeltk {

// Canonical NTU RGB+D 120 action labels, index 0 = action 1 ("drink water").
// The first 60 entries are the NTU RGB+D 60 label set.
const std::vector<std::string>& ntu_action_names();

// Zero-based lookup with range checking.
const std::string& ntu_action_name(int zero_based);

// Reverse lookup; returns -1 when the name is unknown.
int ntu_action_index(const std::string& name);

}  // namespace skeltk
