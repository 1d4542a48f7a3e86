#pragma once
#include <vector>

#include "classnet/data_model.hpp"

namespace fixture {

// The first classroom excerpt (ten turns, Kimberly / Natalie / Samantha)
// with its published labels. Kimberly's opening line points at Natalie's
// notebook, so it carries Natalie as addressee.
std::vector<classnet::Utterance> dialogue();
std::vector<classnet::LabeledUtterance> dialogue_labels();
classnet::Roster dialogue_roster();

}  // namespace fixture
