#pragma once

// Random inputs for property tests. Everything is driven by an explicit
// std::mt19937_64 so a failing case can be replayed from its seed.

#include "oracles.hpp"

#include "taleweaver/director/protocol.hpp"
#include "taleweaver/layout/layout.hpp"
#include "taleweaver/markup/ast.hpp"

#include <random>
#include <string>
#include <vector>

namespace tw_test {

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi);  // inclusive
bool coin(Rng& rng, double p = 0.5);

// A document that the printer can represent exactly, so that
// parse(print(doc)) == doc must hold.
taleweaver::markup::StoryDocument random_document(Rng& rng, int max_knots = 6);

// Expression over the given variable names (height <= max_height).
taleweaver::markup::Expr random_expr(Rng& rng, const std::vector<std::string>& vars, int max_height);

// Guard-free story graph. Knot i only targets knots > i when acyclic.
GraphModel random_model(Rng& rng, int knots, int max_choices, bool acyclic, double dead_end_p = 0.1);

// `.tale` source for a model: knot i is `k<i>`, its paragraph is
// "Passage <i>." and choice j of knot i is labelled `zq<i>x<j>`.
std::string render_model(const GraphModel& g);

// Story with variables, guards, conditional text and cycles, for session
// fuzzing. Always compiles without errors.
std::string random_rich_story(Rng& rng, int knots);

taleweaver::director::Frame random_frame(Rng& rng);

// Arbitrary bytes shaped like a line: mutated frames, JSON fragments and
// raw noise. Never contains '\n'.
std::string random_line(Rng& rng);

std::string random_paragraph_text(Rng& rng);
taleweaver::layout::FontMetrics random_metrics(Rng& rng);

}  // namespace tw_test
