#pragma once

#include "irda/common.hpp"
#include "irda/features.hpp"

#include <string>
#include <string_view>
#include <vector>

// Sentence templates shared by the simulated users and the scripted backend.
// A statement names one cue and one label: "It left its own quadrant, so it is
// disrespectful." Anything else is either a default, a denial, an
// inarticulate remark, or free text.
namespace irda::phrasing {

std::string statement(EnvKind env, std::string_view cue_phrase, std::string_view label_word);
std::string default_statement(EnvKind env, std::string_view label_word);
std::string inarticulate(EnvKind env, std::string_view label_word);
std::string denial(std::string_view feature_name);

std::vector<std::string> split_sentences(std::string_view text);

enum class SentenceKind { Statement, Default, Denial, Inarticulate, Other };

struct Sentence {
  SentenceKind kind = SentenceKind::Other;
  features::Cue cue;  // Statement
  int label = -1;     // Statement, Default
  int feature = -1;   // Denial
};

Sentence classify(EnvKind env, const LabelPair& labels, std::string_view sentence);

/// Catalog features named in `text` by feature name or cue phrase, in catalog order.
std::vector<int> mentioned_features(EnvKind env, std::string_view text);

std::string to_lower(std::string_view s);

} // namespace irda::phrasing
