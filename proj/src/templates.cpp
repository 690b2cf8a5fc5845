#include "kginstruct/templates.hpp"

#include <stdexcept>

namespace kgi::templates {

const char* question(TaskId task) {
    switch (task) {
        case TaskId::EC:
            return "<image>Given the multi-modal knowledge graph. Please count the number of "
                   "entities in it.";
        case TaskId::RC:
            return "<image>Given the multi-modal knowledge graph. Please count the number of "
                   "different relations in it.";
        case TaskId::IC:
            return "<image>Given the multi-modal knowledge graph. Please count the number of "
                   "entities that have image information in the given knowledge graph.";
        case TaskId::TC:
            return "<image>Given the multi-modal knowledge graph. Please count the number of "
                   "knowledge triples in it.";
        case TaskId::SD:
            return "<image>Given the multi-modal knowledge graph. Please describe the knowledge "
                   "presented by it.";
        case TaskId::ED:
            return "<image>Given the multi-modal knowledge graph. Please point out the wrong "
                   "entity in it.";
        case TaskId::ER:
            return "<image>Given the multi-modal knowledge graph. One entity in it is replaced "
                   "by [MASK]. Please select one correct entity from the options. {}";
        case TaskId::RR:
            return "<image>Given the multi-modal knowledge graph. One relation in it is replaced "
                   "by [MASK]. Please select one correct relation from the options. {}";
    }
    throw std::invalid_argument("unknown task id");
}

const char* judge_description_prompt() {
    return
        R"(As an automated answer-scoring system, please evaluate the similarity between the model's generated responses and the correct answers.

Both of the standard answer and model generated answer are describing a knowledge graph with several sentences.

You must determine whether the key entities, relations, and knowledge mentioned in the model's generated response align with the standard answer.

Ultimately, output an integer between 0 and 100, where a higher number indicates greater similarity. Below are our defined basic scoring rules:

- 0 points: No similarity at all

- 1 to 40 points: Minor information overlap

- 40 to 60 points: Moderate information overlap

- 60 to 90 points: Substantial and detailed information overlap

- Above 90 points: Virtually identical, with only minor syntactic variations

Standard Answer:
{}

Model Generated Answer:
{}

Please response a number for the score directly. Do not provide any other text in the response.)";
}

const char* judge_cot_prompt() {
    return
        R"(As an automated answer-scoring system, please evaluate the similarity between the model's generated thought process and the golden label for thought process.

You must determine whether the key entities, relations, and knowledge mentioned in the model's generated thought process align with the standard answer.

Ultimately, output an integer between 0 and 100, where a higher number indicates greater similarity. Below are our defined basic scoring rules:

- 0 points: No similarity at all

- 1 to 30 points: Minor information overlap

- 30 to 60 points: Moderate information overlap

- 60 to 90 points: Substantial and detailed information overlap

- Above 90 points: Virtually identical, with only minor syntactic variations

- If both the thoght process and the final answer match the golden label, full score is awarded.

- If the reasoning process is incorrect but the final answer is correct, partial score may be given.

- If neither the reasoning process nor the final answer is correct, a lower score is assigned.

Standard Thought Process:
{}

Model Generated Thought Process:
{}

Please response a number for the score directly. Do not provide any other text in the response.)";
}

std::string option_block(const std::array<std::string, 5>& options) {
    std::string out;
    for (size_t i = 0; i < options.size(); ++i) {
        if (i) out += '\n';
        out += static_cast<char>('A' + i);
        out += ". ";
        out += options[i];
    }
    return out;
}

std::string fill_slot(std::string_view tmpl, std::string_view value) {
    auto pos = tmpl.find("{}");
    if (pos == std::string_view::npos)
        throw std::invalid_argument("template has no {} slot");
    std::string out(tmpl.substr(0, pos));
    out += value;
    out += tmpl.substr(pos + 2);
    return out;
}

std::string fill_slots(std::string_view tmpl, std::string_view first, std::string_view second) {
    auto pos = tmpl.find("{}");
    if (pos == std::string_view::npos)
        throw std::invalid_argument("template has no {} slot");
    // Fill back-to-front so the first slot's content can itself contain "{}".
    std::string tail = fill_slot(tmpl.substr(pos + 2), second);
    std::string out(tmpl.substr(0, pos));
    out += first;
    out += tail;
    return out;
}

}  // namespace kgi::templates
