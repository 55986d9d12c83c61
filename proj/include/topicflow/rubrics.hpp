#pragma once

#include <string>
#include <vector>

#include "topicflow/common.hpp"

namespace topicflow {

enum class RubricId { stance_similarity, label_alignment, specificity, stance_consistency, semantic_similarity };

inline std::string to_string(RubricId id) {
  switch (id) {
    case RubricId::stance_similarity: return "stance_similarity";
    case RubricId::label_alignment: return "label_alignment";
    case RubricId::specificity: return "specificity";
    case RubricId::stance_consistency: return "stance_consistency";
    case RubricId::semantic_similarity: return "semantic_similarity";
  }
  return "unknown";
}

struct ScoreRange {
  int lo;
  int hi;
  std::string description;
};

struct JudgeRubric {
  RubricId id;
  std::string criteria_name;
  std::vector<std::string> criteria_steps;
  std::string criteria_question;
  std::vector<ScoreRange> score_ranges;
  // Inputs the rendered prompt must bind.
  std::vector<std::string> input_names;
};

// True when the ranges tile 0..10 without gaps or overlap.
inline bool ranges_partition_0_10(const std::vector<ScoreRange>& ranges) {
  int next = 0;
  for (const auto& r : ranges) {
    if (r.lo != next || r.hi < r.lo) return false;
    next = r.hi + 1;
  }
  return next == 11;
}

// Scores stance *distinctness*: 9-10 means the two topics take opposing
// positions.  The integration distance consumes the normalized score as s.
inline const JudgeRubric& stance_similarity_rubric() {
  static const JudgeRubric r{
      RubricId::stance_similarity,
      "topic_stance_similarity",
      {"Read the topic labels and descriptions of the two topics carefully.",
       "Compare the main themes, concepts, and ideas expressed in both topics.",
       "Determine whether the topics are clearly distinct in stances."},
      "Are the two topics clearly distinct in stance, describing opposing or mutually exclusive positions on a theme "
      "or idea?",
      {{0, 2, "The two topics have almost the same stance (very low stance diversity)."},
       {3, 5, "The topics are somewhat distinct in stance (low stance diversity)."},
       {6, 8, "The topics are mostly different in stance (moderate stance diversity)."},
       {9, 10,
        "The topics are clearly distinct, expressing opposing or mutually exclusive positions on a theme or idea "
        "(high stance diversity)."}},
      {"topic_name_1", "topic_short_description_1", "topic_name_2", "topic_short_description_2"}};
  return r;
}

inline const JudgeRubric& label_alignment_rubric() {
  static const JudgeRubric r{
      RubricId::label_alignment,
      "Topic Label Alignment",
      {"Read the topic label and topic description carefully.",
       "Read the given document associated with the topic.",
       "For the given document, strictly judge whether its main meaning, theme, and details are fully and "
       "semantically captured by the topic label and description, and vice versa.",
       "If any meaning-level mismatch, omission, or extraneous concept is found between the document and the label "
       "and description, even if minor, count the document as misaligned."},
      "For the document, do the topic label and description align completely and semantically with its content?",
      {{0, 2,
        "The document is largely misaligned with the topic label and description; its main meaning, theme, or "
        "details differ substantially, and the label fails to capture the document's semantic core."},
       {3, 5,
        "The document shows partial alignment, but key meanings or important details are missing or incorrectly "
        "represented."},
       {6, 8,
        "The document is mostly aligned; minor omissions or slight semantic mismatches are present, but the overall "
        "meaning is adequately captured."},
       {9, 10,
        "The document is fully and semantically aligned; its central meaning, theme, and key details are precisely "
        "and completely represented."}},
      {"topic_name", "topic_short_description", "document"}};
  return r;
}

inline const JudgeRubric& specificity_rubric() {
  static const JudgeRubric r{
      RubricId::specificity,
      "Specificity",
      {"Read the topic label and its description carefully.",
       "When it becomes clear that the topic has a positive or negative impact on business performance or employee "
       "engagement, evaluate whether the leader, the subject of the topic, can easily form an actionable mental image "
       "of the behavioral changes they should implement.",
       "Evaluate whether the topic refers to a narrowly defined situation rather than a broad or generalized category "
       "of issues.",
       "If the topic relies on overly broad themes or spans multiple unrelated aspects, treat it as low in "
       "specificity."},
      "This criterion evaluates the topic along two axes: (i) imaginability, whether a concrete and actionable mental "
      "image can be formed; and (ii) specificity, whether the described situation is narrow and well-defined rather "
      "than overly broad or semantically dispersed. Is the topic imaginable and specific enough for the leader?",
      {{0, 2,
        "Extremely low specificity and imaginability. The topic is abstract, overly broad, or mixes multiple unrelated "
        "aspects, preventing a coherent mental image. The leader cannot visualize who is acting, what is happening, or "
        "in what situation. Example: 組織迷走と多問題化（経営層の方向性が不明確なまま、複数の問題が同時に生じている状況）。"},
       {3, 5,
        "Low specificity and imaginability. Some concrete elements are present, but the topic remains broad or "
        "semantically dispersed, making it difficult to form a single actionable scenario. The leader can grasp the "
        "general idea but not a coherent behavioral change. Example: "
        "新規事業推進の負荷増大（意思決定遅延と情報共有不足により現場負荷が増加している状態）。"},
       {6, 8,
        "Moderate to high specificity and imaginability. The topic is reasonably focused with identifiable actors and "
        "actions, allowing a mostly coherent mental image, though some details may remain generalized. Example: "
        "承認停滞を生む業務放置（管理職によるレビュー遅延で業務進行が滞る状況）。"},
       {9, 10,
        "Very high specificity and imaginability. The topic is narrow, concrete, and semantically unified, with clear "
        "actors, actions, and context. The leader can immediately visualize a vivid and actionable scene. Example: "
        "会議発言遮断による停滞（週次会議で部長が部下の発言を遮る場面）。"}},
      {"topic_name", "topic_short_description"}};
  return r;
}

inline const JudgeRubric& stance_consistency_rubric() {
  static const JudgeRubric r{
      RubricId::stance_consistency,
      "Polarity Stance Consistency",
      {"Read the topic label and description carefully.",
       "Paraphrase the main phenomenon, condition, or state described, without considering emotional or evaluative "
       "direction.",
       "Consider whether the topic could plausibly be interpreted as describing more than one mutually exclusive or "
       "opposite state, such as presence vs. absence, strong vs. weak, positive vs. negative, or increase vs. "
       "decrease. For example, topics like \"manager influence,\" \"job satisfaction,\" or \"work-life balance\" may "
       "refer to either high or low levels, presence or absence, or improvement or decline.",
       "List the main plausible interpretations regarding the presence, absence, or degree of the phenomenon. If any "
       "pair of interpretations are mutually exclusive or opposites, mark the topic as inconsistent. If only a single "
       "meaning or state is reasonably plausible, mark it as consistent."},
      "Do the topic label and description allow for mutually exclusive or opposite meanings (e.g., presence vs. "
      "absence, high vs. low, increase vs. decrease)? If any pair of plausible interpretations are opposites or "
      "mutually exclusive, the topic is inconsistent, regardless of evaluative direction. If only one meaning or state "
      "is reasonably plausible, the topic is consistent.",
      {{0, 2,
        "The topic is clearly contradictory or contains explicitly opposing stances, making it impossible to assign a "
        "single position. Example: \"Manager's management of subordinates\" (describes various and opposing "
        "behaviors and attitudes without indicating a clear stance)."},
       {3, 5,
        "The topic somewhat includes opposing or conflicting stances. Both positive and negative interpretations are "
        "possible, but one may be slightly more dominant."},
       {6, 8, "The topic is generally consistent in stance, though minor ambiguity or alternative interpretations are "
              "possible."},
       {9, 10,
        "The topic is clearly consistent, expressing a single and unambiguous stance. Example: \"Supportive "
        "management practices\" (clearly indicates a positive stance)."}},
      {"topic_name", "topic_short_description"}};
  return r;
}

// Pairwise similarity used by the semantic diversity metric; rendered from
// its own full prompt rather than the generic rubric layout.
inline const JudgeRubric& semantic_similarity_rubric() {
  static const JudgeRubric r{
      RubricId::semantic_similarity,
      "Semantic-based Topic Diversity",
      {"Whether the topic names describe similar content.", "Whether the topic descriptions describe similar content."},
      "Judge the semantic similarity between two topics on a 10-point scale.",
      {{0, 2, "Completely different content"},
       {3, 5, "Partially related, but different in granularity or nuance"},
       {6, 8, "Semantically similar despite lexical differences"},
       {9, 10, "Identical or equivalent wording and content"}},
      {"topic_name_1", "topic_short_description_1", "topic_name_2", "topic_short_description_2"}};
  return r;
}

inline const JudgeRubric& rubric(RubricId id) {
  switch (id) {
    case RubricId::stance_similarity: return stance_similarity_rubric();
    case RubricId::label_alignment: return label_alignment_rubric();
    case RubricId::specificity: return specificity_rubric();
    case RubricId::stance_consistency: return stance_consistency_rubric();
    case RubricId::semantic_similarity: return semantic_similarity_rubric();
  }
  throw ConfigError("unknown rubric");
}

}  // namespace topicflow
