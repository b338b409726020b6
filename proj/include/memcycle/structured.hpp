#pragma once

// Structured-output parsing for model responses: pulls the first JSON
// object/array out of surrounding prose and code fences, or extracts
// <tag>...</tag> fields, and validates required keys.

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/errors.hpp"
#include "memcycle/text.hpp"

namespace memcycle {

enum class PayloadKind { json_object, json_array, tagged };

struct SchemaDescriptor {
    PayloadKind kind = PayloadKind::json_object;
    std::vector<std::string> required;
    std::vector<std::string> optional;  // extracted when present (tagged only)
};

namespace detail {

// Finds the first balanced {...} or [...] starting at or after `from`
// that parses as JSON. String-aware so braces inside quotes don't
// confuse the scan.
inline nlohmann::json first_json_payload(std::string_view response,
                                         char open, char close) {
    for (std::size_t start = 0; start < response.size(); ++start) {
        if (response[start] != open) continue;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < response.size(); ++i) {
            char c = response[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == open) {
                ++depth;
            } else if (c == close) {
                --depth;
                if (depth == 0) {
                    auto candidate = response.substr(start, i - start + 1);
                    nlohmann::json j =
                        nlohmann::json::parse(candidate, nullptr, false);
                    if (!j.is_discarded()) return j;
                    break;  // balanced but invalid; try the next opener
                }
            }
        }
    }
    return nlohmann::json(nlohmann::json::value_t::discarded);
}

inline std::string lowered(std::string_view s) {
    return text::to_lower_ascii(s);
}

// Case-insensitive <tag>...</tag> extraction; returns false if the tag
// is absent.
inline bool extract_tag(std::string_view response, const std::string& tag,
                        std::string& out) {
    std::string haystack = lowered(response);
    std::string open = "<" + lowered(tag) + ">";
    std::string close = "</" + lowered(tag) + ">";
    std::size_t b = haystack.find(open);
    if (b == std::string::npos) return false;
    b += open.size();
    std::size_t e = haystack.find(close, b);
    if (e == std::string::npos) {
        // Unterminated tag: take everything up to the next tag opener
        // or the end of the response.
        e = haystack.find('<', b);
        if (e == std::string::npos) e = haystack.size();
    }
    out = text::trim(response.substr(b, e - b));
    return true;
}

}  // namespace detail

// Lenient string read: missing, null, or non-string values fall back.
inline std::string json_string_or(const nlohmann::json& obj,
                                  const std::string& key,
                                  const std::string& fallback = "") {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    return v.is_string() ? v.get<std::string>() : fallback;
}

inline double json_number_or(const nlohmann::json& obj, const std::string& key,
                             double fallback = 0.0) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    return v.is_number() ? v.get<double>() : fallback;
}

inline nlohmann::json parse_structured(const std::string& response,
                                       const SchemaDescriptor& schema) {
    switch (schema.kind) {
        case PayloadKind::json_object: {
            nlohmann::json j = detail::first_json_payload(response, '{', '}');
            if (j.is_discarded() || !j.is_object()) {
                throw UnparseableResponse(response);
            }
            for (const auto& key : schema.required) {
                if (!j.contains(key)) throw SchemaMismatch(key, response);
            }
            return j;
        }
        case PayloadKind::json_array: {
            nlohmann::json j = detail::first_json_payload(response, '[', ']');
            if (j.is_discarded() || !j.is_array()) {
                throw UnparseableResponse(response);
            }
            return j;
        }
        case PayloadKind::tagged: {
            nlohmann::json out = nlohmann::json::object();
            bool any = false;
            for (const auto& tag : schema.required) {
                std::string value;
                if (detail::extract_tag(response, tag, value)) {
                    out[tag] = value;
                    any = true;
                }
            }
            for (const auto& tag : schema.optional) {
                std::string value;
                if (detail::extract_tag(response, tag, value)) {
                    out[tag] = value;
                    any = true;
                }
            }
            if (!any) throw UnparseableResponse(response);
            for (const auto& tag : schema.required) {
                if (!out.contains(tag)) throw SchemaMismatch(tag, response);
            }
            return out;
        }
    }
    throw UnparseableResponse(response);
}

}  // namespace memcycle
