// Shared test fixtures. The category table here is written out independently
// of the scheme code and serves as the oracle for legality checks.

#ifndef MIDAS_TESTS_FIXTURES_H_
#define MIDAS_TESTS_FIXTURES_H_

#include <map>
#include <string>
#include <vector>

namespace fixtures {

inline const std::vector<std::string> kAllTags = {
    "factual_question", "opinion_question", "yes_no_question",  "task_command",
    "invalid_command",  "appreciation",     "general_opinion",  "complaint",
    "comment",          "statement_non_opinion", "other_answer", "positive_answer",
    "negative_answer",  "abandon",          "nonsense",         "hold",
    "opening",          "closing",          "thanks",           "back_channeling",
    "apology",          "apology_response", "other"};

inline const std::map<std::string, std::string> kCategoryOf = {
    {"factual_question", "question"},   {"opinion_question", "question"},
    {"yes_no_question", "question"},    {"task_command", "command"},
    {"invalid_command", "command"},     {"appreciation", "opinion"},
    {"general_opinion", "opinion"},     {"complaint", "opinion"},
    {"comment", "opinion"},             {"statement_non_opinion", "statement_non_opinion"},
    {"other_answer", "answer"},         {"positive_answer", "answer"},
    {"negative_answer", "answer"},      {"abandon", "abandon"},
    {"nonsense", "nonsense"},           {"hold", "hold"},
    {"opening", "opening"},             {"closing", "closing"},
    {"thanks", "thanks"},               {"back_channeling", "back_channeling"},
    {"apology", "apology"},             {"apology_response", "apology_response"},
    {"other", "other"}};

inline bool crosses_exclusive_pair(const std::string& a, const std::string& b) {
  const std::string& ca = kCategoryOf.at(a);
  const std::string& cb = kCategoryOf.at(b);
  auto is = [&](const char* x, const char* y) {
    return (ca == x && cb == y) || (ca == y && cb == x);
  };
  return is("opinion", "statement_non_opinion") || is("question", "answer");
}

// The example conversation between a machine and a human, as ingest input.
// The last human turn uses the contracted wording of the worked context example.
inline const char* kTable1Tsv =
    "t1\tmachine\twhat do you want to talk about\n"
    "t1\thuman\twhat can you tell me what the top books are right now\n"
    "t1\tmachine\ti am so excited to talk to you about books. i'm actually a pretty big "
    "bookworm, and i love to read when i'm not chatting\n"
    "t1\thuman\toh [SEG] what are some titles of the books you've read\n"
    "t1\tmachine\trecently, i'm reading the great gastby. it's really thought provoking, and i "
    "can see why some people call it the great american novel. how about you? what book do you "
    "like?\n"
    "t1\thuman\ti haven't read a book in a while [SEG] do you have recommendations in the sci "
    "fi\n";

}  // namespace fixtures

#endif  // MIDAS_TESTS_FIXTURES_H_
