#include "mas/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mas/util.hpp"

namespace mas {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open template: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string PromptTemplates::content_hash() const {
    std::string all = system + '\0' + develop + '\0' + user;
    return hex64(fnv1a64(all));
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
    PromptTemplates t;
    t.system = read_file(dir + "/system.txt");
    t.develop = read_file(dir + "/develop.txt");
    t.user = read_file(dir + "/user.txt");
    if (t.user.find("[QUESTION]") == std::string::npos) {
        throw std::runtime_error("template " + dir + "/user.txt has no [QUESTION] slot");
    }
    return t;
}

std::string PromptSet::content_hash() const { return hex64(fnv1a64(low.content_hash() + high.content_hash())); }

PromptSet PromptSet::load(const std::string& dir) { return {PromptTemplates::load(dir + "/low"), PromptTemplates::load(dir + "/high")}; }

ChatRequest assemble_prompt(const PromptTemplates& t, const std::string& task, const std::string& model) {
    ChatRequest req;
    req.system = replace_all(t.system, "[MODEL]", model);
    if (!req.system.empty() && req.system.back() != '\n') req.system += '\n';
    req.system += "\n" + t.develop;
    req.messages.push_back({"user", replace_all(t.user, "[QUESTION]", task)});
    return req;
}

}  // namespace mas
