#include "ovita/llm/gateway.hpp"

#include <string_view>
#include <vector>

namespace ovita::llm {

namespace {

constexpr std::size_t kMaxObjectStarts = 64;

std::vector<std::string_view> fenced_blocks(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while ((i = s.find("```", i)) != std::string_view::npos) {
        std::size_t body = s.find('\n', i + 3);
        if (body == std::string_view::npos) break;
        ++body;
        const std::size_t end = s.find("```", body);
        if (end == std::string_view::npos) {
            out.push_back(s.substr(body));
            break;
        }
        out.push_back(s.substr(body, end - body));
        i = end + 3;
    }
    return out;
}

// End (exclusive) of the balanced {...} starting at `open`, honoring JSON strings.
std::size_t match_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::optional<std::string> text_field(const nlohmann::json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_array()) {
        std::string joined;
        for (const auto& line : *it) {
            if (!line.is_string()) return std::nullopt;
            if (!joined.empty()) joined += '\n';
            joined += line.get<std::string>();
        }
        return joined;
    }
    return std::nullopt;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

bool try_extract(std::string_view s, ModelResponse& out) {
    std::size_t starts = 0;
    for (std::size_t i = s.find('{'); i != std::string_view::npos && starts < kMaxObjectStarts;
         i = s.find('{', i + 1), ++starts) {
        const std::size_t end = match_brace(s, i);
        if (end == std::string_view::npos) continue;
        const auto j = nlohmann::json::parse(s.substr(i, end - i), nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        const auto plan = text_field(j, "plan");
        const auto code = text_field(j, "code");
        if (!plan || !code || blank(*plan) || blank(*code)) continue;
        out.plan = *plan;
        out.code = *code;
        out.parse_ok = true;
        return true;
    }
    return false;
}

}  // namespace

ModelResponse parse_response(const std::string& raw) {
    ModelResponse r;
    r.raw = raw;
    try {
        for (std::string_view block : fenced_blocks(raw)) {
            if (try_extract(block, r)) return r;
        }
        try_extract(raw, r);
    } catch (...) {
        r.plan.clear();
        r.code.clear();
        r.parse_ok = false;
    }
    return r;
}

}  // namespace ovita::llm
