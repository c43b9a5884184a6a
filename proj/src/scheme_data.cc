// Built-in dialog-act scheme: two trees, 23 leaf tags.

#include "midas/taxonomy.h"

namespace midas {

namespace {

std::vector<SchemeNode> builtin_nodes() {
  using K = NodeKind;
  return {
      {"semantic_request", K::type, "", "semantic request", "acts that carry dialog content", ""},
      {"initiative", K::class_, "semantic_request", "initiative",
       "the user proposes a topic or intent", ""},
      {"question", K::category, "initiative", "question", "information request", ""},
      {"open_ended_question", K::subcategory, "question", "open-ended question",
       "questions that cannot be answered with yes or no", ""},
      {"factual_question", K::tag, "open_ended_question", "factual question",
       "asks for factual information", "how old is tom cruise; how's the weather today"},
      {"opinion_question", K::tag, "open_ended_question", "opinion question",
       "asks for an opinion", "what's your favorite book; what do you think of disney movies"},
      {"yes_no_question", K::tag, "question", "yes/no question", "expects a yes or no reply",
       "do you like pizza; did you watch the game last night"},
      {"command", K::category, "initiative", "command", "action request", ""},
      {"task_command", K::tag, "command", "task command",
       "request for an action, possibly phrased as a question or changing the topic",
       "can i ask you a question; let's talk about the immigration policy; repeat"},
      {"invalid_command", K::tag, "command", "invalid command",
       "device or system command the social bot cannot carry out",
       "show me a picture; cook food for me"},
      {"responsive", K::class_, "semantic_request", "responsive",
       "the user continues the current topic", ""},
      {"opinion", K::category, "responsive", "opinion", "opinionated content", ""},
      {"additional_opinion", K::subcategory, "opinion", "additional opinion",
       "opinions that contribute new information, split by sentiment", ""},
      {"appreciation", K::tag, "additional_opinion", "appreciation",
       "positive reaction to the previous utterance", "that's cool; that's really awesome"},
      {"general_opinion", K::tag, "additional_opinion", "general opinion",
       "personal view with polarized sentiment",
       "dogs are adorable; (A: how do you like tom) B: i think he is great"},
      {"complaint", K::tag, "additional_opinion", "complaint",
       "complaint about the other party's response",
       "i can't hear you; what are you talking about; you didn't answer my question"},
      {"comment", K::tag, "opinion", "comment",
       "reply on the other party's response without adding information",
       "(A: my friend thinks we live in the matrix) B: she is probably right; i agree"},
      {"statement_non_opinion", K::tag, "responsive", "statement non-opinion",
       "factual information", "i have a dog named max; i am 10 years old"},
      {"answer", K::category, "responsive", "answer", "reply to a question or proposal", ""},
      {"other_answer", K::tag, "answer", "other answer", "answer that is neither positive nor negative",
       "i don't know; i don't have a favorite; occasionally"},
      {"positive_answer", K::tag, "answer", "positive answer", "positive reply",
       "yes; sure; i think so; why not"},
      {"negative_answer", K::tag, "answer", "negative answer", "negative reply",
       "no; not really; nothing right now"},

      {"functional_request", K::type, "", "functional request",
       "acts that manage discourse coherence", ""},
      {"incomplete", K::class_, "functional_request", "incomplete", "utterance is not complete",
       ""},
      {"abandon", K::tag, "incomplete", "abandon", "cut off before the sentence is complete",
       "so uh; i think; can we"},
      {"nonsense", K::tag, "incomplete", "nonsense", "cannot be understood",
       "he all out"},
      {"social_convention", K::class_, "functional_request", "social convention",
       "social obligations and discourse structure management", ""},
      {"hold", K::tag, "social_convention", "hold", "pause before saying something",
       "let me see; well"},
      {"opening", K::tag, "social_convention", "opening", "opening of a conversation",
       "hello my name is tom; hi"},
      {"closing", K::tag, "social_convention", "closing", "closing of a conversation",
       "nice talking to you; goodbye"},
      {"thanks", K::tag, "social_convention", "thanks", "expression of thankfulness",
       "thank you"},
      {"back_channeling", K::tag, "social_convention", "back-channeling",
       "acknowledgement of the previous utterance", "uh-huh; okay; yeah; right; really"},
      {"apology", K::tag, "social_convention", "apology", "apology", "i'm sorry"},
      {"apology_response", K::tag, "social_convention", "apology response",
       "response to an apology", "that's all right"},
      {"other", K::tag, "functional_request", "other", "fits no other tag", ""},
  };
}

}  // namespace

const Taxonomy& Taxonomy::midas() {
  static const Taxonomy instance = from_parts(
      builtin_nodes(),
      {{"opinion", "statement_non_opinion"}, {"question", "answer"}},
      {
          {"other opinion", "comment"},
          {"pos answer", "positive_answer"},
          {"neg answer", "negative_answer"},
          {"other answers", "other_answer"},
          {"thanking", "thanks"},
      },
      "<builtin>");
  return instance;
}

}  // namespace midas
