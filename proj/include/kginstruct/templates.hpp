#pragma once

#include <array>
#include <string>
#include <string_view>

#include "kginstruct/taskgen.hpp"

// The fixed instruction-template texts baked into every dataset and judge
// request. These strings are load-bearing data: downstream consumers train
// and score against them byte-for-byte, so change nothing here without
// versioning the dataset format.
namespace kgi::templates {

// Question template for a task, starting with the literal "<image>" token.
// ER/RR templates end with a "{}" slot for the formatted option block.
const char* question(TaskId task);

// Judge prompts, each with two "{}" slots (reference first, candidate second).
const char* judge_description_prompt();
const char* judge_cot_prompt();

// "A. <opt>\nB. <opt>\n…E. <opt>" — no trailing newline.
std::string option_block(const std::array<std::string, 5>& options);

// Replaces the first (and optionally second) "{}" occurrence. Slot content is
// inserted verbatim; a missing slot raises std::invalid_argument.
std::string fill_slot(std::string_view tmpl, std::string_view value);
std::string fill_slots(std::string_view tmpl, std::string_view first, std::string_view second);

// Opening/closing lines of the counting-task think sections. The closers end
// with a space; the count is appended. The image-counting closer counts
// "entities" — that is the shipped wording, kept verbatim.
inline constexpr std::string_view kThinkEntitiesOpen =
    "There are several entities in the given multi-modal knowledge graph:";
inline constexpr std::string_view kThinkEntitiesClose = "Therefore, the number of entities is ";
inline constexpr std::string_view kThinkRelationsOpen =
    "There are several different relations in the given multi-modal knowledge graph:";
inline constexpr std::string_view kThinkRelationsClose =
    "Therefore, the number of different relations is ";
inline constexpr std::string_view kThinkImagesOpen =
    "There are several entities with images in the given multi-modal knowledge graph:";
inline constexpr std::string_view kThinkImagesOther = "Other entities without images are:";
inline constexpr std::string_view kThinkImagesClose = "Therefore, the number of entities is ";
inline constexpr std::string_view kThinkTriplesOpen =
    "There are several knowledge triples in the given multi-modal knowledge graph:";
inline constexpr std::string_view kThinkTriplesClose = "Therefore, the number of triples is ";

}  // namespace kgi::templates
