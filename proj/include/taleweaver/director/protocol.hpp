#pragma once

// Director wire protocol: one JSON object per line.
//
// The encoder is canonical: "type" comes first, every other key (nested
// objects included) follows in lexicographic order, and the line ends with
// a single LF. The decoder accepts any JSON object per line and ignores
// fields it does not know.

#include "taleweaver/error.hpp"
#include "taleweaver/runtime/session.hpp"
#include "taleweaver/value.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace taleweaver::director {

inline constexpr int kProtocolVersion = 1;
// Upper bound for one encoded line, LF included.
inline constexpr std::size_t kMaxFrameBytes = 65'536;

// Codes: malformed_json, frame_too_large, missing_field, invalid_field,
// unknown_frame_type.
class ProtocolError : public Error {
public:
    using Error::Error;
};

struct WireSpan {
    std::string style;  // "b", "i", "color" or "align"
    std::string value;  // "#RRGGBB" for color, left/center/right for align
    std::uint64_t start = 0;
    std::uint64_t end = 0;
    bool operator==(const WireSpan&) const = default;
};

struct WireParagraph {
    std::string text;
    std::vector<std::string> tags;
    std::vector<WireSpan> spans;
    bool operator==(const WireParagraph&) const = default;
};

struct WireChoice {
    std::uint64_t id = 0;
    std::string label;
    bool operator==(const WireChoice&) const = default;
};

struct Hello {
    std::int64_t protocol = kProtocolVersion;
    std::string story;
    std::string story_hash;
    std::string role;  // "observer" or "director"
    bool operator==(const Hello&) const = default;
};

struct Status {
    std::uint64_t seq = 0;
    std::string knot;
    bool finished = false;
    std::vector<WireParagraph> paragraphs;
    std::vector<WireChoice> choices;
    runtime::Vars vars;
    bool operator==(const Status&) const = default;
};

struct End {
    std::uint64_t seq = 0;
    bool operator==(const End&) const = default;
};

struct ErrorFrame {
    std::string code;
    std::string message;
    bool operator==(const ErrorFrame&) const = default;
};

struct Claim {
    bool operator==(const Claim&) const = default;
};
struct Release {
    bool operator==(const Release&) const = default;
};
struct Choose {
    std::uint64_t id = 0;
    std::uint64_t seq = 0;
    bool operator==(const Choose&) const = default;
};
struct Set {
    std::string name;
    Value value;
    bool operator==(const Set&) const = default;
};
struct Restart {
    bool operator==(const Restart&) const = default;
};
struct Ping {
    bool operator==(const Ping&) const = default;
};
struct Pong {
    bool operator==(const Pong&) const = default;
};
// Asks the server for a status frame carrying the full transcript.
struct Sync {
    bool operator==(const Sync&) const = default;
};

using Frame = std::variant<Hello, Status, End, ErrorFrame, Claim, Release, Choose, Set, Restart, Ping, Pong, Sync>;

const char* frame_type(const Frame& frame);

// Canonical line, LF included. Invalid UTF-8 in strings is replaced by
// U+FFFD. Throws ProtocolError (frame_too_large) past kMaxFrameBytes.
std::string encode_frame(const Frame& frame);

// Accepts a line with or without its trailing LF (or CRLF). Never crashes on
// arbitrary input; everything that is not a valid frame throws ProtocolError.
Frame decode_frame(std::string_view line);

WireParagraph to_wire(const runtime::EmittedParagraph& p);

}  // namespace taleweaver::director
