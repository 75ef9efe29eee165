#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace peerval {

using json = nlohmann::json;

// Calls `fn(object, line_number)` for every non-blank line. Throws ParseError
// naming the line when a line is not a JSON object, and IntegrityError when
// the file cannot be opened.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Field accessors that raise ParseError with the field name on mismatch.
std::string require_string(const json& obj, const char* field, std::size_t line = 0);
std::string optional_string(const json& obj, const char* field, std::string fallback = {});

}  // namespace peerval
