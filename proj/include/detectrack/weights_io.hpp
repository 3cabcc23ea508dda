#pragma once

// Weight files: a JSON object mapping each parameter block name to
// {"shape": [...], "values": [...]}, values in storage order.

#include "detectrack/params.hpp"

#include <string>

namespace detectrack {

std::string weights_to_json(const ParamList& params, int indent = -1);
// Names and shapes must match `params` exactly; values are written into it.
void weights_from_json(const std::string& text, const ParamList& params,
                       const std::string& source = "<weights>");

void save_weights(const std::string& path, const ParamList& params);
void load_weights(const std::string& path, const ParamList& params);

}  // namespace detectrack
