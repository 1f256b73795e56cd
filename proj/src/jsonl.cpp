#include "mas/jsonl.hpp"

#include <fstream>
#include <stdexcept>

#include "mas/util.hpp"

namespace mas {

JsonlWriter::JsonlWriter(const std::string& path, const nlohmann::json& header, bool append) {
    file_ = std::fopen(path.c_str(), append ? "ab" : "wb");
    if (!file_) throw std::runtime_error("cannot open for writing: " + path);
    if (!header.is_null()) write(nlohmann::json{{"header", header}});
}

JsonlWriter::~JsonlWriter() {
    if (file_) std::fclose(file_);
}

void JsonlWriter::write(const nlohmann::json& record) {
    std::string line = record.dump() + "\n";
    std::lock_guard lock(mu_);
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
        throw std::runtime_error("write failed");
    }
}

JsonlFile read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    JsonlFile out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw std::runtime_error("malformed record in " + path);
        }
        if (first && j.is_object() && j.size() == 1 && j.contains("header")) {
            out.header = j["header"];
        } else {
            out.records.push_back(std::move(j));
        }
        first = false;
    }
    return out;
}

}  // namespace mas
