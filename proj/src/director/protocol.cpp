#include "taleweaver/director/protocol.hpp"

#include <json.hpp>

namespace taleweaver::director {

using json = nlohmann::json;

namespace {

constexpr int kMaxJsonDepth = 64;

template <typename T>
struct TypeName;

#define TW_FRAME_NAME(T, name) \
    template <>                \
    struct TypeName<T> {       \
        static constexpr const char* value = name; \
    };
TW_FRAME_NAME(Hello, "hello")
TW_FRAME_NAME(Status, "status")
TW_FRAME_NAME(End, "end")
TW_FRAME_NAME(ErrorFrame, "error")
TW_FRAME_NAME(Claim, "claim")
TW_FRAME_NAME(Release, "release")
TW_FRAME_NAME(Choose, "choose")
TW_FRAME_NAME(Set, "set")
TW_FRAME_NAME(Restart, "restart")
TW_FRAME_NAME(Ping, "ping")
TW_FRAME_NAME(Pong, "pong")
TW_FRAME_NAME(Sync, "sync")
#undef TW_FRAME_NAME

json value_json(const Value& v)
{
    switch (v.type()) {
    case ValueType::Int: return v.as_int();
    case ValueType::Str: return v.as_str();
    case ValueType::Bool: return v.as_bool();
    }
    return nullptr;
}

json payload(const Frame& frame)
{
    return std::visit(
        [](const auto& f) -> json {
            using T = std::decay_t<decltype(f)>;
            json j = json::object();
            if constexpr (std::is_same_v<T, Hello>) {
                j["protocol"] = f.protocol;
                j["story"] = f.story;
                j["story_hash"] = f.story_hash;
                j["role"] = f.role;
            } else if constexpr (std::is_same_v<T, Status>) {
                j["seq"] = f.seq;
                j["knot"] = f.knot;
                j["finished"] = f.finished;
                json paragraphs = json::array();
                for (const WireParagraph& p : f.paragraphs) {
                    json spans = json::array();
                    for (const WireSpan& s : p.spans) {
                        json span = {{"style", s.style}, {"start", s.start}, {"end", s.end}};
                        if (!s.value.empty()) {
                            span["value"] = s.value;
                        }
                        spans.push_back(std::move(span));
                    }
                    paragraphs.push_back({{"text", p.text}, {"tags", p.tags}, {"spans", std::move(spans)}});
                }
                j["paragraphs"] = std::move(paragraphs);
                json choices = json::array();
                for (const WireChoice& c : f.choices) {
                    choices.push_back({{"id", c.id}, {"label", c.label}});
                }
                j["choices"] = std::move(choices);
                json vars = json::object();
                for (const auto& [name, value] : f.vars) {
                    vars[name] = value_json(value);
                }
                j["vars"] = std::move(vars);
            } else if constexpr (std::is_same_v<T, End>) {
                j["seq"] = f.seq;
            } else if constexpr (std::is_same_v<T, ErrorFrame>) {
                j["code"] = f.code;
                j["message"] = f.message;
            } else if constexpr (std::is_same_v<T, Choose>) {
                j["id"] = f.id;
                j["seq"] = f.seq;
            } else if constexpr (std::is_same_v<T, Set>) {
                j["name"] = f.name;
                j["value"] = value_json(f.value);
            }
            return j;
        },
        frame);
}

// ---- decoding helpers ------------------------------------------------------

[[noreturn]] void missing(const char* key)
{
    throw ProtocolError("missing_field", std::string("missing field '") + key + "'");
}

[[noreturn]] void invalid(const char* key, const char* want)
{
    throw ProtocolError("invalid_field", std::string("field '") + key + "' must be " + want);
}

const json& get(const json& obj, const char* key)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        missing(key);
    }
    return *it;
}

std::string get_string(const json& obj, const char* key)
{
    const json& v = get(obj, key);
    if (!v.is_string()) {
        invalid(key, "a string");
    }
    return v.get<std::string>();
}

bool get_bool(const json& obj, const char* key)
{
    const json& v = get(obj, key);
    if (!v.is_boolean()) {
        invalid(key, "a boolean");
    }
    return v.get<bool>();
}

std::uint64_t get_count(const json& obj, const char* key)
{
    const json& v = get(obj, key);
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    invalid(key, "a non-negative integer");
}

std::int64_t get_int(const json& obj, const char* key)
{
    const json& v = get(obj, key);
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        invalid(key, "a 64-bit integer");
    }
    if (!v.is_number_integer()) {
        invalid(key, "an integer");
    }
    return v.get<std::int64_t>();
}

const json& get_array(const json& obj, const char* key)
{
    const json& v = get(obj, key);
    if (!v.is_array()) {
        invalid(key, "an array");
    }
    return v;
}

Value to_value(const json& v, const char* key)
{
    if (v.is_boolean()) {
        return Value::boolean(v.get<bool>());
    }
    if (v.is_string()) {
        return Value::text(v.get<std::string>());
    }
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        invalid(key, "a 64-bit integer");
    }
    if (v.is_number_integer()) {
        return Value::integer(v.get<std::int64_t>());
    }
    invalid(key, "an integer, string or boolean");
}

Status decode_status(const json& j)
{
    Status s;
    s.seq = get_count(j, "seq");
    s.knot = get_string(j, "knot");
    s.finished = get_bool(j, "finished");
    for (const json& p : get_array(j, "paragraphs")) {
        if (!p.is_object()) {
            invalid("paragraphs", "a list of objects");
        }
        WireParagraph wp;
        wp.text = get_string(p, "text");
        for (const json& t : get_array(p, "tags")) {
            if (!t.is_string()) {
                invalid("tags", "a list of strings");
            }
            wp.tags.push_back(t.get<std::string>());
        }
        for (const json& sp : get_array(p, "spans")) {
            if (!sp.is_object()) {
                invalid("spans", "a list of objects");
            }
            WireSpan ws;
            ws.style = get_string(sp, "style");
            ws.start = get_count(sp, "start");
            ws.end = get_count(sp, "end");
            if (sp.contains("value")) {
                ws.value = get_string(sp, "value");
            }
            wp.spans.push_back(std::move(ws));
        }
        s.paragraphs.push_back(std::move(wp));
    }
    for (const json& c : get_array(j, "choices")) {
        if (!c.is_object()) {
            invalid("choices", "a list of objects");
        }
        s.choices.push_back({get_count(c, "id"), get_string(c, "label")});
    }
    const json& vars = get(j, "vars");
    if (!vars.is_object()) {
        invalid("vars", "an object");
    }
    for (const auto& [name, value] : vars.items()) {
        s.vars.emplace(name, to_value(value, "vars"));
    }
    return s;
}

// Rejects absurd nesting before handing the text to the JSON parser.
void check_depth(std::string_view text)
{
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
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
        } else if (c == '{' || c == '[') {
            if (++depth > kMaxJsonDepth) {
                throw ProtocolError("malformed_json", "JSON nests too deeply");
            }
        } else if (c == '}' || c == ']') {
            --depth;
        }
    }
}

}  // namespace

const char* frame_type(const Frame& frame)
{
    return std::visit([](const auto& f) { return TypeName<std::decay_t<decltype(f)>>::value; }, frame);
}

std::string encode_frame(const Frame& frame)
{
    const std::string body = payload(frame).dump(-1, ' ', false, json::error_handler_t::replace);
    std::string line = std::string("{\"type\":\"") + frame_type(frame) + "\"";
    if (body.size() > 2) {
        line += ",";
        line.append(body, 1, body.size() - 1);
    } else {
        line += "}";
    }
    line.push_back('\n');
    if (line.size() > kMaxFrameBytes) {
        throw ProtocolError("frame_too_large", "encoded frame is " + std::to_string(line.size()) +
                                                   " bytes (limit " + std::to_string(kMaxFrameBytes) + ")");
    }
    return line;
}

Frame decode_frame(std::string_view line)
{
    if (line.ends_with('\n')) {
        line.remove_suffix(1);
        if (line.ends_with('\r')) {
            line.remove_suffix(1);
        }
    }
    if (line.size() + 1 > kMaxFrameBytes) {
        throw ProtocolError("frame_too_large", "frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes");
    }
    check_depth(line);
    json j;
    try {
        j = json::parse(line.begin(), line.end());
    } catch (const json::exception& e) {
        throw ProtocolError("malformed_json", e.what());
    }
    if (!j.is_object()) {
        throw ProtocolError("malformed_json", "frame must be a JSON object");
    }
    const std::string type = get_string(j, "type");
    if (type == "hello") {
        return Hello{get_int(j, "protocol"), get_string(j, "story"), get_string(j, "story_hash"),
                     get_string(j, "role")};
    }
    if (type == "status") return decode_status(j);
    if (type == "end") return End{get_count(j, "seq")};
    if (type == "error") return ErrorFrame{get_string(j, "code"), get_string(j, "message")};
    if (type == "claim") return Claim{};
    if (type == "release") return Release{};
    if (type == "choose") return Choose{get_count(j, "id"), get_count(j, "seq")};
    if (type == "set") return Set{get_string(j, "name"), to_value(get(j, "value"), "value")};
    if (type == "restart") return Restart{};
    if (type == "ping") return Ping{};
    if (type == "pong") return Pong{};
    if (type == "sync") return Sync{};
    throw ProtocolError("unknown_frame_type", "unknown frame type '" + type + "'");
}

WireParagraph to_wire(const runtime::EmittedParagraph& p)
{
    WireParagraph w;
    w.text = p.plain_text;
    w.tags = p.tags;
    for (const runtime::StyledRange& r : p.spans) {
        WireSpan s;
        s.style = markup::tag_name(r.style.kind);
        if (r.style.kind == markup::StyleTag::Kind::Color) {
            s.value = markup::color_hex(r.style.rgb);
        } else if (r.style.kind == markup::StyleTag::Kind::Align) {
            s.value = markup::to_string(r.style.align);
        }
        s.start = r.start;
        s.end = r.end;
        w.spans.push_back(std::move(s));
    }
    return w;
}

}  // namespace taleweaver::director
