#include "rein/transcript.hpp"

#include <fstream>
#include <sstream>

#include "rein/error.hpp"

namespace rein {

void write_transcript(std::ostream& os, const Transcript& t) {
    json header{{"record", "header"},
                {"schema_version", t.header.schema_version},
                {"scenario_id", t.header.scenario_id},
                {"mode", t.header.mode},
                {"seeds", t.header.seeds}};
    os << header.dump() << '\n';
    std::size_t seq = 0;
    for (const auto& e : t.context.entries()) {
        json line = entry_to_json(e);
        line["record"] = "entry";
        line["seq"] = seq++;
        os << line.dump() << '\n';
    }
    if (t.trailer) {
        json trailer = *t.trailer;
        trailer["record"] = "episode";
        os << trailer.dump() << '\n';
    }
}

std::string write_transcript(const Transcript& t) {
    std::ostringstream os;
    write_transcript(os, t);
    return os.str();
}

Transcript read_transcript(std::istream& is) {
    Transcript out;
    std::vector<ContextEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    bool have_trailer = false;
    bool last_had_newline = true;

    while (std::getline(is, line)) {
        ++lineno;
        last_had_newline = !is.eof();
        if (line.empty()) throw MalformedArtifact("empty line", lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedArtifact(std::string("invalid record: ") + e.what(), lineno, e.byte);
        }
        try {
            const std::string kind = j.at("record").get<std::string>();
            if (!have_header) {
                if (kind != "header") throw MalformedArtifact("first record must be a header", lineno);
                out.header.schema_version = j.at("schema_version").get<int>();
                if (out.header.schema_version != kTranscriptSchemaVersion)
                    throw MalformedArtifact("unsupported schema version", lineno);
                out.header.scenario_id = j.at("scenario_id").get<std::string>();
                out.header.mode = j.at("mode").get<std::string>();
                out.header.seeds = j.at("seeds");
                have_header = true;
            } else if (have_trailer) {
                throw MalformedArtifact("record after episode trailer", lineno);
            } else if (kind == "entry") {
                if (j.at("seq").get<std::size_t>() != entries.size())
                    throw MalformedArtifact("sequence number out of order", lineno);
                j.erase("record");
                j.erase("seq");
                entries.push_back(entry_from_json(j));
            } else if (kind == "episode") {
                j.erase("record");
                out.trailer = std::move(j);
                have_trailer = true;
            } else {
                throw MalformedArtifact("unknown record kind '" + kind + "'", lineno);
            }
        } catch (const MalformedArtifact&) {
            throw;
        } catch (const std::exception& e) {
            throw MalformedArtifact(e.what(), lineno);
        }
    }
    if (!have_header) throw MalformedArtifact("missing header", lineno);
    if (!last_had_newline) throw MalformedArtifact("truncated final record", lineno, line.size());
    try {
        out.context = ExtendedContext::from_entries(std::move(entries));
    } catch (const InvalidValue& e) {
        throw MalformedArtifact(e.what(), lineno);
    }
    return out;
}

Transcript read_transcript_string(const std::string& text) {
    std::istringstream is(text);
    return read_transcript(is);
}

void save_transcript(const std::filesystem::path& path, const Transcript& t) {
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot write " + tmp.string());
        write_transcript(os, t);
        if (!os) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Transcript load_transcript(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MalformedArtifact("cannot open " + path.string(), 0);
    return read_transcript(is);
}

}  // namespace rein
