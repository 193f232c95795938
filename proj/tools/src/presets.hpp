#pragma once

#include <string>
#include <vector>

namespace evolyap::tools {

// Built-in experiment descriptions selectable with --system and used by the
// reproduce command. Names: scalar-decay, appendix, heat, ks.
const std::string& preset_config(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace evolyap::tools
