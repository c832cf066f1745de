#include "irda/phrasing.hpp"

#include <algorithm>
#include <cctype>

namespace irda::phrasing {

namespace {

std::string capitalized(std::string s) {
  if (!s.empty()) {
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  }
  return s;
}

std::string verdict(EnvKind env, std::string_view label_word) {
  return (env == EnvKind::AppleFarm ? "it is " : "the car should ") + std::string(label_word);
}

std::string last_word(std::string_view s) {
  std::size_t end = s.size();
  while (end > 0 && !std::isalnum(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  std::size_t start = end;
  while (start > 0 && (std::isalnum(static_cast<unsigned char>(s[start - 1])) || s[start - 1] == '-')) {
    --start;
  }
  return std::string(s.substr(start, end - start));
}

} // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string statement(EnvKind env, std::string_view cue_phrase, std::string_view label_word) {
  return capitalized(std::string(cue_phrase)) + ", so " + verdict(env, label_word) + ".";
}

std::string default_statement(EnvKind env, std::string_view label_word) {
  if (env == EnvKind::AppleFarm) {
    return "Nothing I care about happened here, so " + verdict(env, label_word) + ".";
  }
  return "Nothing I care about stands out here, so " + verdict(env, label_word) + ".";
}

std::string inarticulate(EnvKind env, std::string_view label_word) {
  return "I can't quite say why, but " + verdict(env, label_word) + ".";
}

std::string denial(std::string_view feature_name) {
  return "No, " + std::string(feature_name) + " does not matter to me.";
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      current += ' ';
      continue;
    }
    current += c;
    const bool terminal = c == '.' || c == '!' || c == '?';
    if (terminal && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      out.push_back(current);
      current.clear();
    }
  }
  out.push_back(current);
  std::vector<std::string> trimmed;
  for (auto& s : out) {
    const auto b = s.find_first_not_of(' ');
    if (b == std::string::npos) {
      continue;
    }
    const auto e = s.find_last_not_of(' ');
    trimmed.push_back(s.substr(b, e - b + 1));
  }
  return trimmed;
}

Sentence classify(EnvKind env, const LabelPair& labels, std::string_view sentence) {
  const std::string s = to_lower(sentence);
  const auto& cat = features::catalog(env);
  Sentence out;
  if (s.find("does not matter to me") != std::string::npos) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < cat.size(); ++i) {
      const auto& name = cat.features[i].name;
      if (s.find(name) != std::string::npos && name.size() > best) {
        best = name.size();
        out.feature = static_cast<int>(i);
      }
    }
    if (out.feature >= 0) {
      out.kind = SentenceKind::Denial;
    }
    return out;
  }
  if (s.find("can't quite say why") != std::string::npos) {
    out.kind = SentenceKind::Inarticulate;
    return out;
  }
  const std::string word = last_word(s);
  if (word == to_lower(labels.aligned)) {
    out.label = 1;
  } else if (word == to_lower(labels.misaligned)) {
    out.label = 0;
  } else {
    return out;
  }
  if (s.find("nothing i care about") != std::string::npos) {
    out.kind = SentenceKind::Default;
    return out;
  }
  std::size_t best = 0;
  for (const auto& cue : cat.all_cues()) {
    const auto& phrase = cat.phrase(cue);
    if (phrase.size() > best && s.find(phrase) != std::string::npos) {
      best = phrase.size();
      out.cue = cue;
      out.kind = SentenceKind::Statement;
    }
  }
  if (out.kind != SentenceKind::Statement) {
    out.label = -1;
  }
  return out;
}

std::vector<int> mentioned_features(EnvKind env, std::string_view text) {
  const std::string s = to_lower(text);
  const auto& cat = features::catalog(env);
  std::vector<int> out;
  for (std::size_t i = 0; i < cat.size(); ++i) {
    const auto& f = cat.features[i];
    const bool hit = s.find(f.name) != std::string::npos || s.find(f.cue) != std::string::npos ||
                     (!f.negative_cue.empty() && s.find(f.negative_cue) != std::string::npos);
    if (hit) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

} // namespace irda::phrasing
