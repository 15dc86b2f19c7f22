#pragma once
// Line-delimited transcript files.
//
// Line 1 is a header record, each following line one context entry with a
// monotonically increasing "seq", and an optional final trailer record that
// carries episode-level data (see simulation.hpp).

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "rein/dialogue.hpp"

namespace rein {

inline constexpr int kTranscriptSchemaVersion = 1;

struct TranscriptHeader {
    int schema_version = kTranscriptSchemaVersion;
    std::string scenario_id;
    std::string mode;
    json seeds = json::object();

    bool operator==(const TranscriptHeader&) const = default;
};

struct Transcript {
    TranscriptHeader header;
    ExtendedContext context;
    std::optional<json> trailer;

    bool operator==(const Transcript&) const = default;
};

void write_transcript(std::ostream& os, const Transcript& t);
std::string write_transcript(const Transcript& t);

// Throws MalformedArtifact with line/offset diagnostics.
Transcript read_transcript(std::istream& is);
Transcript read_transcript_string(const std::string& text);

// Atomic write (temp file + rename) so interrupted runs never leave half files.
void save_transcript(const std::filesystem::path& path, const Transcript& t);
Transcript load_transcript(const std::filesystem::path& path);

}  // namespace rein
