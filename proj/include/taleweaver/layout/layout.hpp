#pragma once

// Per-word rectangles on a virtual tablet. Each WordBox is the collider a
// display would build around a rendered word, so gaze or pointer samples can
// be mapped back to the word (and character range) under them.

#include "taleweaver/error.hpp"
#include "taleweaver/markup/ast.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace taleweaver::layout {

using Align = markup::StyleTag::Align;

struct FontMetrics {
    std::map<char32_t, std::int64_t> glyph_advance;  // per-glyph overrides
    std::int64_t default_advance = 10;                // any other non-space glyph
    std::int64_t space_advance = 10;
    std::int64_t line_height = 24;

    std::int64_t advance(char32_t cp) const;
};

struct Tablet {
    std::int64_t width = 800;
    std::int64_t height = 600;
};

struct ParagraphInput {
    std::string text;
    Align align = Align::Left;
};

struct WordBox {
    std::size_t paragraph_index = 0;
    std::size_t word_index = 0;
    std::string text;
    std::size_t char_start = 0;  // [char_start, char_end) in code points
    std::size_t char_end = 0;
    std::int64_t line = 0;       // global visual line; y0 == line * line_height
    std::int64_t x0 = 0;
    std::int64_t y0 = 0;
    std::int64_t x1 = 0;
    std::int64_t y1 = 0;
    bool overflow = false;       // alone on its line and still wider than the tablet

    bool contains(std::int64_t x, std::int64_t y) const { return x0 <= x && x < x1 && y0 <= y && y < y1; }
    bool operator==(const WordBox&) const = default;
};

struct LayoutOptions {
    // Fail with tablet_overrun instead of letting text run past the bottom.
    bool strict_height = false;
};

// Codes: invalid_metrics, invalid_tablet, tablet_overrun.
class LayoutError : public Error {
public:
    using Error::Error;
};

// Greedy first-fit wrapping. Words are maximal runs of non-whitespace and
// are separated by exactly one space advance. Paragraphs are separated by
// one empty line. Center/right alignment shift each line by its leftover
// width; centering gives the odd unit to the left gap.
std::vector<WordBox> layout_paragraphs(std::span<const ParagraphInput> paragraphs, const FontMetrics& metrics,
                                       const Tablet& tablet, LayoutOptions options = {});

// Box containing (x, y), boxes being half-open. Linear in the box count.
const WordBox* hit_test(std::span<const WordBox> boxes, std::int64_t x, std::int64_t y);

// Logarithmic hit testing over boxes in the order layout_paragraphs emits
// them. The boxes must outlive the index.
class HitIndex {
public:
    // Throws std::invalid_argument when boxes are not in layout order.
    explicit HitIndex(std::span<const WordBox> boxes);

    const WordBox* at(std::int64_t x, std::int64_t y) const;

private:
    std::span<const WordBox> boxes_;
};

}  // namespace taleweaver::layout
