#pragma once

#include <cstdio>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace mas {

// Appends one JSON document per line. Each line goes out in a single write
// followed by a flush, so an interrupted run leaves only whole records.
class JsonlWriter {
public:
    // Truncates unless `append`. A non-null header is written first as
    // {"header": ...}.
    JsonlWriter(const std::string& path, const nlohmann::json& header = nullptr, bool append = false);
    ~JsonlWriter();
    JsonlWriter(const JsonlWriter&) = delete;
    JsonlWriter& operator=(const JsonlWriter&) = delete;

    void write(const nlohmann::json& record);

private:
    std::FILE* file_ = nullptr;
    std::mutex mu_;
};

struct JsonlFile {
    nlohmann::json header;  // null when the file has none
    std::vector<nlohmann::json> records;
};

// Blank lines are skipped; a truncated final line is dropped.
JsonlFile read_jsonl(const std::string& path);

}  // namespace mas
