#pragma once
// Small string and file helpers shared across modules.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace rein {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool istarts_with(std::string_view s, std::string_view prefix);

// Replaces every {{name}} with vars[name] in a single left-to-right pass;
// substituted text is never rescanned. Unknown placeholders are kept.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

// Throws ConfigError naming the path when the file cannot be read.
std::string read_text_file(const std::filesystem::path& p);
// Writes through a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& p, std::string_view content);

}  // namespace rein
