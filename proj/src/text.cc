#include "midas/text.h"

#include <cctype>
#include <cstdio>

namespace midas {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  auto emit = [&](char c) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  };

  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '<') {
      auto close = raw.find('>', i + 1);
      if (close != std::string_view::npos) {
        i = close;
        pending_space = true;
        continue;
      }
    }
    // U+2019 right single quotation mark, used as an apostrophe by many editors.
    if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < raw.size() &&
        static_cast<unsigned char>(raw[i + 1]) == 0x80 &&
        static_cast<unsigned char>(raw[i + 2]) == 0x99) {
      emit('\'');
      i += 2;
      continue;
    }
    unsigned char u = static_cast<unsigned char>(c);
    if (is_space(c) || (u < 0x80 && std::ispunct(u) && c != '\'')) {
      pending_space = true;
      continue;
    }
    emit(static_cast<char>(std::tolower(u)));
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t end, std::string_view sep) {
  std::string out;
  for (std::size_t i = begin; i < end && i < tokens.size(); ++i) {
    if (i > begin) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep) {
  return join_tokens(tokens, 0, tokens.size(), sep);
}

std::string slugify(std::string_view name) {
  std::string out;
  bool pending = false;
  for (char c : name) {
    if (is_space(c) || c == '-' || c == '/' || c == '_') {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) out.push_back('_');
    pending = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::vector<std::string>> split_sentences(std::string_view raw) {
  std::vector<std::vector<std::string>> sentences;
  auto flush = [&](std::string_view piece) {
    auto tokens = split_tokens(normalize_text(piece));
    if (!tokens.empty()) sentences.push_back(std::move(tokens));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '.' || c == '!' || c == '?') {
      flush(raw.substr(start, i - start));
      start = i + 1;
    } else if (raw.compare(i, kBoundaryMarker.size(), kBoundaryMarker) == 0) {
      flush(raw.substr(start, i - start));
      i += kBoundaryMarker.size() - 1;
      start = i + 1;
    }
  }
  flush(raw.substr(start));
  return sentences;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace midas
