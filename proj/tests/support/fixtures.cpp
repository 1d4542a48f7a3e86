#include "fixtures.hpp"

#include <string>

namespace fixture {

using classnet::FineLabel;

namespace {
struct Line {
  const char* speaker;
  const char* text;
  FineLabel label;
};

const Line kLines[] = {
    {"Kimberly", "I thought you did just it by 5 because like (points to N's notebook).", FineLabel::EngageLow},
    {"Natalie", "Then I got to 5s and made 10, so I put 5 and 5 to (inaudible). And then I counted how much there was both and…it was 35.", FineLabel::ExplainOwnIdea},
    {"Kimberly", "Okay. Samantha go next.", FineLabel::Uncorrelated},
    {"Samantha", "What I did was right here. I did yesterday and then I didn't have enough for everyone. And then I passed the last 10 because if I put it in with these, wouldn't it be equal and then I split it. And then I carried it in and then I divided by once, and then I counted it and then I got 1, 2, 3, 4, 5 and this was 30, and then I got 35.", FineLabel::ExplainOwnIdea},
    {"Kimberly", "What I did was like I did like Samantha's but I just labeled one day and two day, and then I just made a cross. Then, here I did the same thing, I got the seven 10s, but when I end up with 2, I just cross 2 off and then the 10. But then I noticed this was like that so I turned them into little 10 ones. And then I got 1, 2, 3, 4, 5, 6, 7, 8, 9. 10. I got 35.", FineLabel::ExplainOwnIdea},
    {"Natalie", "(has a look of disbelief) How do you know it was 35?", FineLabel::EngageMedium},
    {"Kimberly", "Like I counted it. 10, 20. I already knew this was 20, 30", FineLabel::ExplainOwnIdea},
    {"Natalie", "40.", FineLabel::Uncorrelated},
    {"Kimberly", "(laughs)…30, 31, 32, 33, 34, 35. And that's my answer for how I got to 35. (adjusts camera) And now can I go first for the second number share?", FineLabel::ExplainOwnIdea},
    {"Natalie", "Yes.", FineLabel::Uncorrelated},
};

std::string id_of(int i) { return "T2-" + std::to_string(i); }
}  // namespace

std::vector<classnet::Utterance> dialogue() {
  std::vector<classnet::Utterance> out;
  int i = 0;
  for (const auto& l : kLines) {
    classnet::Utterance u{id_of(i), "L0", "T2", i, l.speaker, l.text, std::nullopt};
    if (i == 0) u.addressee_id = "Natalie";
    out.push_back(u);
    ++i;
  }
  return out;
}

std::vector<classnet::LabeledUtterance> dialogue_labels() {
  std::vector<classnet::LabeledUtterance> out;
  int i = 0;
  for (const auto& l : kLines) out.push_back({id_of(i++), l.label, "HUMAN", std::nullopt, "paper", std::nullopt});
  return out;
}

classnet::Roster dialogue_roster() {
  return classnet::Roster({{"Kimberly", "Kimberly", 1, 360.0, 15.0},
                           {"Natalie", "Natalie", 1, 340.0, 12.0},
                           {"Samantha", "Samantha", 1, 355.0, 14.0}},
                          "0=male,1=female");
}

}  // namespace fixture
