#include "taleweaver/layout/layout.hpp"

#include "taleweaver/util/utf8.hpp"

#include <algorithm>
#include <stdexcept>

namespace taleweaver::layout {

std::int64_t FontMetrics::advance(char32_t cp) const
{
    if (utf8::is_space(cp)) {
        return space_advance;
    }
    const auto it = glyph_advance.find(cp);
    return it == glyph_advance.end() ? default_advance : it->second;
}

namespace {

void validate(const FontMetrics& m, const Tablet& t)
{
    const bool glyphs_ok = std::all_of(m.glyph_advance.begin(), m.glyph_advance.end(),
                                       [](const auto& kv) { return kv.second > 0; });
    if (m.default_advance <= 0 || m.space_advance <= 0 || m.line_height <= 0 || !glyphs_ok) {
        throw LayoutError("invalid_metrics", "advances and line height must be positive");
    }
    if (t.width <= 0 || t.height <= 0) {
        throw LayoutError("invalid_tablet", "tablet width and height must be positive");
    }
}

struct Word {
    std::size_t start;
    std::size_t end;
    std::int64_t width;
};

std::vector<Word> split_words(const std::u32string& cps, const FontMetrics& m)
{
    std::vector<Word> words;
    std::size_t i = 0;
    while (i < cps.size()) {
        if (utf8::is_space(cps[i])) {
            ++i;
            continue;
        }
        Word w{i, i, 0};
        while (i < cps.size() && !utf8::is_space(cps[i])) {
            w.width += m.advance(cps[i]);
            ++i;
        }
        w.end = i;
        words.push_back(w);
    }
    return words;
}

std::int64_t align_shift(Align align, std::int64_t leftover)
{
    switch (align) {
    case Align::Left: return 0;
    case Align::Right: return leftover;
    case Align::Center: return (leftover + 1) / 2;
    }
    return 0;
}

}  // namespace

std::vector<WordBox> layout_paragraphs(std::span<const ParagraphInput> paragraphs, const FontMetrics& metrics,
                                       const Tablet& tablet, LayoutOptions options)
{
    validate(metrics, tablet);
    std::vector<WordBox> boxes;
    std::int64_t next_line = 0;

    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        const std::u32string cps = utf8::decode(paragraphs[p].text);
        const std::vector<Word> words = split_words(cps, metrics);
        if (words.empty()) {
            continue;
        }

        std::int64_t line = next_line;
        std::size_t line_begin = boxes.size();
        std::int64_t cursor = 0;
        auto finish_line = [&] {
            const std::int64_t leftover = std::max<std::int64_t>(0, tablet.width - cursor);
            const std::int64_t shift = align_shift(paragraphs[p].align, leftover);
            for (std::size_t b = line_begin; b < boxes.size(); ++b) {
                boxes[b].x0 += shift;
                boxes[b].x1 += shift;
            }
        };

        for (std::size_t w = 0; w < words.size(); ++w) {
            const Word& word = words[w];
            const bool line_empty = boxes.size() == line_begin;
            if (!line_empty && cursor + metrics.space_advance + word.width > tablet.width) {
                finish_line();
                ++line;
                line_begin = boxes.size();
                cursor = 0;
            }
            const bool first_on_line = boxes.size() == line_begin;
            const std::int64_t x0 = first_on_line ? 0 : cursor + metrics.space_advance;
            WordBox box;
            box.paragraph_index = p;
            box.word_index = w;
            box.text = utf8::encode(std::u32string_view(cps).substr(word.start, word.end - word.start));
            box.char_start = word.start;
            box.char_end = word.end;
            box.line = line;
            box.x0 = x0;
            box.x1 = x0 + word.width;
            box.y0 = line * metrics.line_height;
            box.y1 = box.y0 + metrics.line_height;
            box.overflow = first_on_line && word.width > tablet.width;
            cursor = box.x1;
            boxes.push_back(std::move(box));
        }
        finish_line();
        next_line = line + 2;  // one empty line between paragraphs
    }

    if (options.strict_height && !boxes.empty() && boxes.back().y1 > tablet.height) {
        throw LayoutError("tablet_overrun", "text needs " + std::to_string(boxes.back().y1) +
                                                " units of height but the tablet has " +
                                                std::to_string(tablet.height));
    }
    return boxes;
}

const WordBox* hit_test(std::span<const WordBox> boxes, std::int64_t x, std::int64_t y)
{
    for (const WordBox& b : boxes) {
        if (b.contains(x, y)) {
            return &b;
        }
    }
    return nullptr;
}

HitIndex::HitIndex(std::span<const WordBox> boxes) : boxes_(boxes)
{
    const bool ordered = std::is_sorted(boxes.begin(), boxes.end(), [](const WordBox& a, const WordBox& b) {
        return a.y0 != b.y0 ? a.y0 < b.y0 : a.x0 < b.x0;
    });
    if (!ordered) {
        throw std::invalid_argument("HitIndex needs boxes in layout order");
    }
}

const WordBox* HitIndex::at(std::int64_t x, std::int64_t y) const
{
    const auto row = std::partition_point(boxes_.begin(), boxes_.end(), [&](const WordBox& b) { return b.y1 <= y; });
    if (row == boxes_.end() || row->y0 > y) {
        return nullptr;
    }
    const std::int64_t row_y = row->y0;
    const auto row_end = std::partition_point(row, boxes_.end(), [&](const WordBox& b) { return b.y0 == row_y; });
    const auto hit = std::partition_point(row, row_end, [&](const WordBox& b) { return b.x1 <= x; });
    if (hit == row_end || hit->x0 > x) {
        return nullptr;
    }
    return &*hit;
}

}  // namespace taleweaver::layout
