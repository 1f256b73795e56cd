#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "mas/protocol.hpp"

namespace testing {

inline std::string fixture_path(const std::string& name) { return std::string(MAS_SOURCE_DIR) + "/tests/fixtures/" + name; }

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string fixture(const std::string& name) { return read_text(fixture_path(name)); }

// Agent block for hand-built High DoM plans.
inline std::string agent_xml(const std::string& id, const std::string& name, const std::string& input,
                             const std::string& extra = "") {
    return "<agent><agent_id>" + id + "</agent_id><agent_name>" + name +
           "</agent_name><agent_description>d</agent_description><required_arguments><agent_input>" + input +
           "</agent_input>" + extra + "</required_arguments></agent>";
}

inline std::string edges_xml(const std::vector<std::pair<std::string, std::string>>& edges) {
    std::string out = "<edge>";
    for (const auto& [a, b] : edges) out += "<from>" + a + "</from><to>" + b + "</to>";
    return out + "</edge>";
}

}  // namespace testing
