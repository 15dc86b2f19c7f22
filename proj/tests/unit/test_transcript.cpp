#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "rein/error.hpp"
#include "rein/transcript.hpp"

using namespace rein;

namespace {

void append_utf8(std::string& s, char32_t cp) {
    if (cp < 0x80) {
        s += static_cast<char>(cp);
    } else if (cp < 0x800) {
        s += static_cast<char>(0xC0 | (cp >> 6));
        s += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        s += static_cast<char>(0xE0 | (cp >> 12));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        s += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        s += static_cast<char>(0xF0 | (cp >> 18));
        s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        s += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string random_text(std::mt19937& rng) {
    static const char32_t pool[] = {U'a', U'Z', U' ', U'"', U'\\', U'\n', U'\t', U'é', U'ß', U'中',
                                    U'文', U'Ж', U'א', U'\U0001F600', U'\U0001F44D', U'✓', U'{'};
    std::string s = "x";
    int n = std::uniform_int_distribution<int>(1, 24)(rng);
    for (int i = 0; i < n; ++i) append_utf8(s, pool[rng() % std::size(pool)]);
    return s;
}

Transcript sample(std::mt19937& rng) {
    ExtendedContext ctx;
    int turns = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int t = 0; t < turns; ++t) {
        ctx = ctx.append_user_turn(Utterance::user(random_text(rng)));
        if (rng() % 2) ctx = ctx.inject_inception(InceptionBlock{random_text(rng)});
        if (rng() % 2)
            ctx = ctx.record_action(ControlAction::tool("think", {{"thought", random_text(rng)}}),
                                    json{{"echo", random_text(rng)}});
        ctx = ctx.record_action(ControlAction::respond(random_text(rng)));
    }
    Transcript tr;
    tr.context = ctx;
    tr.header.scenario_id = "s-" + std::to_string(rng() % 1000);
    tr.header.mode = "targeted";
    tr.header.seeds = {{"episode", rng()}};
    if (rng() % 2) tr.trailer = json{{"note", random_text(rng)}};
    return tr;
}

}  // namespace

TEST_CASE("transcripts round-trip, unicode included") {
    std::mt19937 rng(99);
    for (int i = 0; i < 100; ++i) {
        Transcript t = sample(rng);
        std::string text = write_transcript(t);
        Transcript back = read_transcript_string(text);
        CHECK(back == t);
        CHECK(write_transcript(back) == text);
    }
}

TEST_CASE("one record per line with increasing seq") {
    std::mt19937 rng(5);
    Transcript t = sample(rng);
    std::istringstream in(write_transcript(t));
    std::string line;
    std::getline(in, line);
    CHECK(json::parse(line)["record"] == "header");
    CHECK(json::parse(line)["schema_version"] == kTranscriptSchemaVersion);
    std::size_t seq = 0;
    while (std::getline(in, line)) {
        json j = json::parse(line);
        if (j["record"] == "entry") CHECK(j["seq"] == seq++);
    }
    CHECK(seq == t.context.entries().size());
}

TEST_CASE("malformed artifacts carry line diagnostics") {
    std::mt19937 rng(7);
    Transcript t = sample(rng);
    t.trailer.reset();
    std::string text = write_transcript(t);

    SUBCASE("truncated") {
        std::string cut = text.substr(0, text.size() - 5);
        try {
            read_transcript_string(cut);
            FAIL("expected MalformedArtifact");
        } catch (const MalformedArtifact& e) {
            CHECK(e.line() >= 2);
        }
    }
    SUBCASE("garbage line") {
        std::string bad = text + "{not json\n";
        try {
            read_transcript_string(bad);
            FAIL("expected MalformedArtifact");
        } catch (const MalformedArtifact& e) {
            CHECK(e.line() == t.context.entries().size() + 2);
        }
    }
    SUBCASE("missing header") { CHECK_THROWS_AS(read_transcript_string(""), MalformedArtifact); }
    SUBCASE("seq out of order") {
        auto first_nl = text.find('\n');
        auto second_nl = text.find('\n', first_nl + 1);
        std::string swapped = text.substr(0, first_nl + 1) + text.substr(second_nl + 1);
        if (t.context.entries().size() > 1) CHECK_THROWS_AS(read_transcript_string(swapped), MalformedArtifact);
    }
}

TEST_CASE("save_transcript writes atomically and loads back") {
    fixtures::TempDir dir;
    std::mt19937 rng(11);
    Transcript t = sample(rng);
    auto file = dir.path() / "nested" / "t.jsonl";
    save_transcript(file, t);
    CHECK(load_transcript(file) == t);
    CHECK_FALSE(std::filesystem::exists(file.string() + ".tmp"));
    CHECK_THROWS_AS(load_transcript(dir.path() / "missing.jsonl"), MalformedArtifact);
}
