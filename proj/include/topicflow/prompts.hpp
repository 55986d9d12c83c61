#pragma once

// Prompt bodies for the LLM-assisted stages.  Placeholders use {{name}} so
// that literal JSON braces in the output-format sections need no escaping.

#include <string>
#include <vector>

namespace topicflow::prompts {

enum class Language { en, ja };

// ---------------------------------------------------------------- extraction

inline const char* const kExtractEn = R"(# Task
From the given text, extract instances of the specified extraction target at the minimum granularity, and classify them according to the provided classification guidelines.

# Requirements
- If multiple instances of the extraction target are present, extract all of them.
- If no instances of the extraction target are found, return an empty list.
- Avoid speculative or overly interpretive reasoning, and base the extraction strictly on information explicitly stated in the text.

# Metadata for the given text
{{input_text_metadata}}

# Given text
{{input_text}}

# Extraction target
{{extraction_target}}

# Supplementary definition of the extraction target
{{extraction_target_supplement}}

# Classification guidelines
{{classification_guideline}}

# Output format
Output the results in JSON using the following schema.
{{output_json_schema}})";

inline const char* const kExtractJa = R"(# タスク
与えられた文章から#抽出対象を最小粒度で抽出し、#分類仕様に従って分類してください。

# 要件
・抽出対象の記述が複数ある場合は、全て抽出してください。
・抽出対象の記述がない場合は、空リストを返してください。
・飛躍した解釈や過度な推測を避け、文章に明確に記載されている内容に基づいて抽出してください。

# 与えられた文章に関するメタ情報
{{input_text_metadata}}

# 与えられた文章
{{input_text}}

# 抽出対象
{{extraction_target}}

# 抽出対象の補足定義
{{extraction_target_supplement}}

# 分類仕様
{{classification_guideline}}

# 出力形式
以下の形式でJSONを出力してください。
{{output_json_schema}})";

inline const char* const kExtractionTargetEn =
    "Attributes of a leader that are explicitly described in the review text (not wishes or ideals) and "
    "attributable to an individual leader (not general employees, policies, or organizational features). "
    "Passive statements are excluded.";

inline const char* const kExtractionSupplementEn =
    "Do not infer beyond the text. Preserve the original meaning. Split the content into minimal, concise units.";

inline const char* const kClassificationGuidelineEn =
    "target_leader_layer: top (chief executive level), non_top (leaders below the chief executive), unknown "
    "(evidence insufficient). element_type: behavior, attitude, ability, other (evidence insufficient).";

inline const char* const kExtractionSchema = R"({
  "extractions": [
    {
      "text": str,
      "target_leader_layer": "top" | "non_top" | "unknown",
      "element_type": "behavior" | "attitude" | "ability" | "other",
      "implicit_extraction": bool,
      "change_meaning": bool,
      "is_past": bool
    }
  ]
})";

// ---------------------------------------------------------------- naming

inline const char* const kNameTopicEn = R"(# Task
For a single topic generated by the topic model, determine an appropriate topic name by referring to the topic's top words and representative documents.

# Requirements
- In addition to the topic name (topic_name), provide a short description of the topic (topic_short_description).
- Output the result in JSON format.

# Supplementary naming guidelines
- The topic name should be a noun phrase.
- The topic name should be concise; avoid redundant expressions such as "A and B" or "A and B-related," and keep the number of words to a minimum.
- The topic name should comprehensively reflect the content of the representative documents.
- The topic name should be as specific as possible.
- The topic name should be consistent with the overall context inferred from the metadata of the topic modeling corpus.
- The topic description should consist of approximately one sentence and serve as a supplementary explanation of the topic name.

# Metadata of the topic modeling corpus
{{document_metadata}}

# Top words of the topic
{{topic_top_words}}

# Representative documents of the topic
{{topic_representative_documents}}

# Output schema
topic_name: string
topic_short_description: string

# Output format
{
  "topic_name": "Topic name",
  "topic_short_description": "Short description of the topic"
})";

inline const char* const kNameTopicJa = R"(# タスク
トピックモデルによって作成された1つのトピックについて、#トピックの上位単語および#トピックの代表文章を参考に、適切なトピック名を決定してください。

# 要件
・トピック名（topic_name）に加えて、トピック名についての短い説明（topic_short_description）を付与してください。
・JSON形式で出力してください。

# 命名規則の補足定義
・トピック名は名詞句としてください。
・トピック名は簡潔な表現とし、「AとB」「AおよびBに関する〜」のような冗長な表現は避け、単語数はできるだけ少なくしてください。
・トピック名は、#トピックの代表文章の内容を網羅する表現としてください。
・トピック名は、可能な限り具体的な表現としてください。
・トピック名は、#トピックモデリング対象の文章全体のメタ情報から読み取れる文脈やニュアンスに沿った表現としてください。
・トピック説明は1文程度とし、トピック名の補足説明となる内容としてください。

# トピックモデリング対象の文章全体のメタ情報
{{document_metadata}}

# トピックの上位単語
{{topic_top_words}}

# トピックの代表文章
{{topic_representative_documents}}

# 出力型
topic_name: str
topic_short_description: str

# 出力形式
{
  "topic_name": "トピック名",
  "topic_short_description": "トピック名についての短い説明"
})";

// ---------------------------------------------------------------- assignment

inline const char* const kAssignTopicsEn = R"(# Task
Given the input text, select the topic or topics from the list of candidate topics to which the text corresponds.

# Requirements
- Judge whether the text corresponds to each topic by considering both the topic name and its description.
- If the text corresponds to multiple topics, select all applicable topics.
- For each selected topic, output the topic ID (topic_id), topic name (topic_name), and the reason for selection (reason).
- Output the results in JSON format.

# Supplementary guidelines for topic assignment
- Avoid judgments based on speculative or inferential reasoning.
- Select only topics that clearly apply to the text; apply a conservative judgment criterion.
- Make the judgment in accordance with the nuance inferred from the metadata of the input text.

# Notes on output
- If the text does not correspond to any topic, set the topic ID to -1 and the topic name to Other.
- Except for Other, do not output topics that are not included in the candidate topic list.

# Metadata of the text
{{document_metadata}}

# Candidate topics (legend: topic_id, topic name (topic description))
{{topic_definitions}}

# Input text
{{input_text}}

# Output format
{
  "topic_list": [
    {
      "topic_id": int,
      "topic_name": str,
      "reason": str
    },
    ...
  ]
})";

inline const char* const kAssignTopicsJa = R"(# タスク
与えられた文章が、候補となるトピックのうちどのトピックに該当するかを選出してください。

# 要件
・トピック名およびトピックの説明の両方を確認したうえで、文章がトピックに該当するかを判断してください。
・複数のトピックに該当する場合は、複数選択してください。
・選択したトピックについて、トピックID（topic_id）、トピック名（topic_name）、および選択理由（reason）を出力してください。
・JSON形式で出力してください。

# トピック判定における補足定義
・飛躍した推測による判断は避けてください。
・明確に該当すると判断できるトピックのみを選出してください（厳しめの判断基準としてください）。
・文章のメタ情報を踏まえたニュアンスに沿って判断してください。

# 出力に関する注意点
・どのトピックにも該当しない場合は、トピックIDは -1、トピック名は その他 を選択してください。
・その他 を除き、候補となるトピックに記載されていないトピックは出力しないでください。

# 文章のメタ情報
{{document_metadata}}

# 候補となるトピック（凡例：トピックID，トピック名（トピック説明））
{{topic_definitions}}

# 文章
{{input_text}}

# 出力形式
{
  "topic_list": [
    {
      "topic_id": int,
      "topic_name": str,
      "reason": str
    },
    ...
  ]
})";

// ---------------------------------------------------------------- polarity split

inline const char* const kPolaritySplitEn = R"(# Task
For a single topic generated by the topic model, determine whether documents with opposing stances are mixed within the topic. If opposing stances are present, split the topic accordingly.

# Definition of terms
- "Opposing stances" refer to cases in which documents classified under the same topic convey conflicting meanings.
- Examples of opposing stances include contrasts such as "present vs. absent," "many vs. few," and "strong vs. weak."

# Requirements
- Output the judgment result indicating whether opposing stances are present (contain_opposing_stance).
- If topic splitting is required, output a list of child topics (child_topics).
- Each element of child_topics should be a dictionary containing the child topic name (child_topic_name), a short description (child_topic_short_description), up to three example documents (document_examples), and the reason for interpreting the stance as opposing (opposing_stance_reason).
- If splitting is not required, output an empty list for child_topics.
- Output the results in JSON format.

# Supplementary guidelines for judgment
- Topic information is provided in the topic name, description, and the set of documents assigned to the topic.
- Judge opposing stances only when documents can be clearly interpreted as conveying conflicting stances.

# Supplementary guidelines for naming child topics
- Child topic names should be noun phrases.
- Child topic names should be concise; avoid redundant expressions such as "A and B."
- Child topic names should be as specific as possible.
- Child topic names should be interpretable on their own without reference to the parent topic.
- Child topic names should reflect the overall context inferred from the metadata of the topic modeling corpus.

# Topic name and description
Topic name: {{topic_name}}
Topic description: {{topic_short_description}}

# Metadata of the topic modeling corpus
{{document_metadata}}

# Documents assigned to the topic
{{topic_documents}}

# Output format (if opposing stances are present)
{
  "contain_opposing_stance": true,
  "child_topics": [
    {
      "child_topic_name": "Child topic name 1",
      "child_topic_short_description": "Description of child topic 1",
      "document_examples": "Up to three example documents",
      "opposing_stance_reason": "Reason for interpreting the stance as opposing"
    },
    {
      "child_topic_name": "Child topic name 2",
      "child_topic_short_description": "Description of child topic 2",
      "document_examples": "Up to three example documents",
      "opposing_stance_reason": "Reason for interpreting the stance as opposing"
    }
  ]
}

# Output format (if no opposing stances are present)
{
  "contain_opposing_stance": false,
  "child_topics": []
})";

inline const char* const kPolaritySplitJa = R"(# タスク
トピックモデルによって作成された1つのトピックに、スタンスが対立する文章が混在しているかどうかを判定してください。混在している場合は、そのトピックを分割してください。

# 用語の定義
・スタンスが対立するとは、同一トピックに分類されるものの、対立する意味合いを持つ文章が含まれている場合を指します。
・スタンスが対立する例として、「有る vs 無い」「多い vs 少ない」「強い vs 弱い」などがあります。

# 要件
・スタンスが対立する文章が混在しているかの判定結果（contain_opposing_stance）を出力してください。
・トピックの分割が必要な場合は、分割された子トピック（child_topics）のリストを出力してください。
・child_topics の各要素には、子トピック名（child_topic_name）、子トピックの説明（child_topic_short_description）、該当する文章例（最大3件、document_examples）、およびスタンスが対立すると解釈した理由（opposing_stance_reason）を含めてください。
・分割が不要な場合は、child_topics は空リストとしてください。
・JSON形式で出力してください。

# 判定における補足定義
・該当トピックの情報は、トピック名、トピック説明、およびトピックに該当する文章群に記載されています。
・明らかにスタンスが対立していると解釈できる文章が混在している場合のみ、スタンスが対立すると判定してください。

# 子トピック命名規則の補足定義
・名詞句としてください。
・簡潔な表現とし、「AとB」「AおよびBに関する〜」のような冗長な表現は避け、単語数はできるだけ少なくしてください。
・可能な限り具体的な表現としてください。
・親トピック名がなくても、子トピック名のみで意味が明確に解釈できる表現としてください。
・トピックモデリング対象の文章全体のメタ情報を考慮した表現としてください。

# トピック名と説明
トピック名: {{topic_name}}
トピック説明: {{topic_short_description}}

# トピックモデリング対象の文章全体のメタ情報
{{document_metadata}}

# トピックに該当する文章群
{{topic_documents}}

# 出力形式（スタンスが対立する文章が含まれている場合）
{
  "contain_opposing_stance": true,
  "child_topics": [
    {
      "child_topic_name": "子トピック名1",
      "child_topic_short_description": "子トピック名1の説明",
      "document_examples": "子トピック名1の文章例（最大3件）",
      "opposing_stance_reason": "子トピック2とスタンスが対立すると解釈した理由"
    },
    {
      "child_topic_name": "子トピック名2",
      "child_topic_short_description": "子トピック名2の説明",
      "document_examples": "子トピック名2の文章例（最大3件）",
      "opposing_stance_reason": "子トピック1とスタンスが対立すると解釈した理由"
    }
  ]
}

# 出力形式（スタンスが対立する文章が含まれていない場合）
{
  "contain_opposing_stance": false,
  "child_topics": []
})";

// ---------------------------------------------------------------- child assignment

inline const char* const kChildAssignEn = R"(# Task
Determine which of the candidate child topics best matches the input text that has been classified under the parent topic.

# Requirements
- Always output the topic ID (topic_id), topic name (topic_name), and the reason for the decision (reason).
- If the text does not match any of the candidate child topics, select Other.
- Output the result in JSON format.

# Supplementary guidelines for judgment
- Make the judgment by taking into account the metadata of the input text.

# Parent topic
{{parent_topic}}

# Input text
{{input_text}}

# Metadata of the text
{{document_metadata}}

# Candidate child topics (legend: topic_id, topic name (topic description))
{{child_topic_definition}}

# Output format
{
  "topic_id": int,
  "topic_name": str,
  "reason": str
})";

inline const char* const kChildAssignJa = R"(# タスク
親トピックに分類されている文章が、子トピック候補のいずれに一致するかを判断してください。

# 要件
・トピックID（topic_id）、トピック名（topic_name）、および判断理由（reason）を必ず出力してください。
・いずれの子トピック候補とも一致しない場合は、その他 を選択してください。
・JSON形式で出力してください。

# 判定の際の補足定義
・文章のメタ情報を考慮して判断してください。

# 親トピック
{{parent_topic}}

# 文章
{{input_text}}

# 文章のメタ情報
{{document_metadata}}

# トピック候補（凡例：トピックID，トピック名（トピック説明））
{{child_topic_definition}}

# 出力形式
{
  "topic_id": int,
  "topic_name": str,
  "reason": str
})";

// ---------------------------------------------------------------- pairwise similarity (diversity metric)

inline const char* const kSemanticSimilarityEn = R"(# Task
To evaluate the diversity of topic modeling results, judge the semantic similarity between two topics.

# Requirements
- Based on the topic names and descriptions, evaluate similarity using the criteria below and assign a score on a 10-point scale.
- Output the reason for the assigned score.
- Output the results in JSON format.

# Evaluation criteria
- Whether the topic names describe similar content.
- Whether the topic descriptions describe similar content.

# Definition of similarity
- The two topics are described at a comparable level of granularity.
- The two topics share similar evaluative or affective nuances (e.g., positive vs. negative).

# Topic 1
Topic name: {{topic_name_1}}
Topic description: {{topic_short_description_1}}

# Topic 2
Topic name: {{topic_name_2}}
Topic description: {{topic_short_description_2}}

# Examples
Score 0-2: Completely different content
Topic 1: "Lack of teamwork" (inability or unwillingness to cooperate with team members).
Topic 2: "One-on-one meetings" (regular one-on-one meetings between supervisors and subordinates).

Score 3-5: Partially related, but different in granularity or nuance
Topic 1: "Lack of teamwork" (attitudes or behaviors reflecting inability or unwillingness to cooperate).
Topic 2: "Teamwork culture" (organizational culture regarding collaboration and cooperation).

Score 6-8: Semantically similar despite lexical differences
Topic 1: "Lack of teamwork" (difficulty or reluctance to collaborate).
Topic 2: "Passive teamwork" (collaboration characterized by passive attitudes).

Score 10: Identical wording and content
Topic names and descriptions are fully identical.

# Output format
{
  "score": int,
  "reason": str
})";

inline const char* const kSemanticSimilarityJa = R"(# メトリクス名
Semantic-based Topic Diversity

# タスク
トピックモデリング結果の多様性を評価するために、2つのトピック内容の類似性を判断してください。

# 要件
・トピック名およびトピック説明をもとに、以下の判定基準を参考に10段階評価でスコアリングしてください。
・そのように判断した理由を出力してください。
・JSON形式で出力してください。

# 判定基準
・2つのトピック名が似た内容であるか。
・2つのトピック説明が似た内容であるか。

# 「似ている」の定義
・内容の粒度が同程度であること。
・ポジティブ／ネガティブなどのニュアンスが一致していること。

# Topic 1
トピック名: {{topic_name_1}}
トピック説明: {{topic_short_description_1}}

# Topic 2
トピック名: {{topic_name_2}}
トピック説明: {{topic_short_description_2}}

# 例
評価スコア0-2：全く異なる内容
Topic 1：チームワークの欠如（協力できない、または協力しようとしない態度や行動）。
Topic 2：1on1面談の実施（上司と部下が定期的に面談を行うこと）。

評価スコア3-5：一部関連性はあるが粒度やニュアンスが異なる
Topic 1：チームワークの欠如（協力できない態度や行動）。
Topic 2：チームワークの風土（協力姿勢や能力に関する文化）。

評価スコア6-8：用語は異なるが内容は類似
Topic 1：チームワーク不足（協力できない状況）。
Topic 2：消極的チームワーク（協力姿勢が消極的な状態）。

評価スコア10：完全に同一
トピック名および説明が完全に一致している場合。

# 出力形式
{
  "score": int,
  "reason": str
})";

}  // namespace topicflow::prompts
