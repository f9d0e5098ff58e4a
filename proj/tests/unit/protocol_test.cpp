#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "generators.hpp"

#include "taleweaver/director/protocol.hpp"
#include "taleweaver/runtime/session.hpp"

#include <json.hpp>

using namespace taleweaver;
using namespace taleweaver::director;

namespace {

std::string decode_code(std::string_view line)
{
    try {
        decode_frame(line);
    } catch (const ProtocolError& e) {
        return e.code();
    }
    return "ok";
}

// "type" first, then every object's keys in ascending order, at every level.
bool canonical_order(const nlohmann::ordered_json& j, bool top)
{
    if (j.is_array()) {
        return std::all_of(j.begin(), j.end(), [](const auto& v) { return canonical_order(v, false); });
    }
    if (!j.is_object()) return true;
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) {
        if (!canonical_order(v, false)) return false;
        keys.push_back(k);
    }
    if (top) {
        if (keys.empty() || keys.front() != "type") return false;
        keys.erase(keys.begin());
    }
    return std::is_sorted(keys.begin(), keys.end());
}

}  // namespace

TEST_CASE("canonical encodings")
{
    CHECK(encode_frame(Choose{1, 4}) == "{\"type\":\"choose\",\"id\":1,\"seq\":4}\n");
    CHECK(encode_frame(Claim{}) == "{\"type\":\"claim\"}\n");
    CHECK(encode_frame(End{9}) == "{\"type\":\"end\",\"seq\":9}\n");
    CHECK(encode_frame(Set{"score", Value::integer(2)}) == "{\"type\":\"set\",\"name\":\"score\",\"value\":2}\n");
    CHECK(encode_frame(ErrorFrame{"stale_seq", "old"}) == "{\"type\":\"error\",\"code\":\"stale_seq\",\"message\":\"old\"}\n");
    CHECK(encode_frame(Hello{1, "T", "00ff", "observer"}) ==
          "{\"type\":\"hello\",\"protocol\":1,\"role\":\"observer\",\"story\":\"T\",\"story_hash\":\"00ff\"}\n");

    Status st;
    st.seq = 3;
    st.knot = "cave";
    st.paragraphs.push_back({"Dark.", {"mood"}, {{"b", "", 0, 4}, {"color", "#FF0000", 0, 1}}});
    st.choices.push_back({0, "brave"});
    st.vars.emplace("score", Value::integer(1));
    st.vars.emplace("name", Value::text("a"));
    CHECK(encode_frame(st) ==
          "{\"type\":\"status\",\"choices\":[{\"id\":0,\"label\":\"brave\"}],\"finished\":false,\"knot\":\"cave\","
          "\"paragraphs\":[{\"spans\":[{\"end\":4,\"start\":0,\"style\":\"b\"},"
          "{\"end\":1,\"start\":0,\"style\":\"color\",\"value\":\"#FF0000\"}],\"tags\":[\"mood\"],\"text\":\"Dark.\"}],"
          "\"seq\":3,\"vars\":{\"name\":\"a\",\"score\":1}}\n");
}

TEST_CASE("decode errors")
{
    CHECK(decode_code("{\"type\":\"nope\"}") == "unknown_frame_type");
    CHECK(decode_code("{\"type\":\"choose\",\"id\":1}") == "missing_field");
    CHECK(decode_code("{\"id\":1}") == "missing_field");
    CHECK(decode_code("{\"type\":\"choose\",\"id\":-1,\"seq\":0}") == "invalid_field");
    CHECK(decode_code("{\"type\":\"choose\",\"id\":\"1\",\"seq\":0}") == "invalid_field");
    CHECK(decode_code("{\"type\":7}") == "invalid_field");
    CHECK(decode_code("{\"type\":\"set\",\"name\":\"x\",\"value\":1.5}") == "invalid_field");
    CHECK(decode_code("{\"type\":\"set\",\"name\":\"x\",\"value\":9223372036854775808}") == "invalid_field");
    CHECK(decode_code("{\"type\":\"set\",\"name\":\"x\",\"value\":null}") == "invalid_field");
    CHECK(decode_code("not json") == "malformed_json");
    CHECK(decode_code("") == "malformed_json");
    CHECK(decode_code("[1,2]") == "malformed_json");
    CHECK(decode_code("{\"type\":\"ping\"} trailing") == "malformed_json");
    CHECK(decode_code("{\"type\":\"ping\",\"s\":\"\xff\"}") == "malformed_json");
    CHECK(decode_code(std::string(70, '[') + std::string(70, ']')) == "malformed_json");
    CHECK(decode_code("{\"type\":\"ping\",\"pad\":\"" + std::string(kMaxFrameBytes, 'x') + "\"}") == "frame_too_large");
}

TEST_CASE("decoder tolerance")
{
    CHECK(decode_frame("{\"seq\":4,\"type\":\"choose\",\"id\":1,\"extra\":[1,{\"a\":2}]}\r\n") == Frame{Choose{1, 4}});
    CHECK(decode_frame("  { \"type\" : \"ping\" }  ") == Frame{Ping{}});
    CHECK(decode_frame("{\"type\":\"set\",\"name\":\"m\",\"value\":-9223372036854775808}") ==
          Frame{Set{"m", Value::integer(INT64_MIN)}});
    CHECK(decode_frame("{\"type\":\"sync\"}") == Frame{Sync{}});
    CHECK(decode_frame("{\"type\":\"end\",\"seq\":18446744073709551615}") == Frame{End{UINT64_MAX}});
}

TEST_CASE("oversized frames are refused by the encoder")
{
    CHECK_THROWS_AS(encode_frame(ErrorFrame{"x", std::string(kMaxFrameBytes, 'a')}), ProtocolError);
    // Largest message that still fits: total line is exactly the limit.
    const std::string prefix = "{\"type\":\"error\",\"code\":\"x\",\"message\":\"";
    const std::size_t room = kMaxFrameBytes - prefix.size() - 3;
    CHECK(encode_frame(ErrorFrame{"x", std::string(room, 'a')}).size() == kMaxFrameBytes);
}

TEST_CASE("invalid UTF-8 is replaced on encode")
{
    const std::string line = encode_frame(ErrorFrame{"x", "a\xff" "b"});
    CHECK(line == "{\"type\":\"error\",\"code\":\"x\",\"message\":\"a\xEF\xBF\xBD" "b\"}\n");
    CHECK(decode_frame(line) == Frame{ErrorFrame{"x", "a\xEF\xBF\xBD" "b"}});
}

TEST_CASE("random frames round-trip and encode canonically")
{
    tw_test::Rng rng(42);
    for (int i = 0; i < 3000; ++i) {
        const Frame f = tw_test::random_frame(rng);
        const std::string line = encode_frame(f);
        REQUIRE(line.back() == '\n');
        CHECK(std::count(line.begin(), line.end(), '\n') == 1);
        CHECK(decode_frame(line) == f);
        CHECK(canonical_order(nlohmann::ordered_json::parse(line), true));
    }
}

TEST_CASE("decoder never crashes on noise")
{
    tw_test::Rng rng(43);
    for (int i = 0; i < 3000; ++i) {
        const std::string line = tw_test::random_line(rng);
        try {
            const Frame f = decode_frame(line);
            // Whatever decodes must re-encode and decode to the same frame.
            CHECK(decode_frame(encode_frame(f)) == f);
        } catch (const ProtocolError&) {
        }
    }
}

TEST_CASE("to_wire maps styles")
{
    auto g = tw_test::compile_ok("== s\n# t\n<align=right><color=#00FF00>a</color> <i>b</i></align>\n-> END\n");
    auto s = runtime::Session::create(g);
    const auto p = s.continue_story().paragraphs.at(0);
    const WireParagraph w = to_wire(p);
    CHECK(w.text == "a b");
    CHECK(w.tags == std::vector<std::string>{"t"});
    REQUIRE(w.spans.size() == 3);
    CHECK(w.spans[0] == WireSpan{"align", "right", 0, 3});
    CHECK(w.spans[1] == WireSpan{"color", "#00FF00", 0, 1});
    CHECK(w.spans[2] == WireSpan{"i", "", 2, 3});
}
