#include "compresslab/prompts.hpp"

#include "compresslab/errors.hpp"

namespace compresslab {
namespace {

constexpr std::string_view kCompressQuerySpecific =
    R"(Summarize the following text to include ONLY information needed to answer the question.
Extract the key points relevant to the question.
DO NOT ANSWER THE QUESTION DIRECTLY.

Question:
{query}

Text:
{text}

Your summary (make sure to include all important details / background information related to the *question*. **DO NOT ANSWER THE QUESTION**))";

constexpr std::string_view kCompressMemory =
    R"(You are a memory compression assistant, tasked with summarizing a chat conversation.
Produce a summary that preserves all details that could be useful as memory for a language model. DO NOT invent any information.

CHAT:
{conversation}

Your summary (Just plain text, no formatting.))";

constexpr std::string_view kCompressQueryAgnostic =
    R"(Summarize the following text and produce a summary that preserves all details that could be needed to answer likely questions about the text. Do NOT invent facts.

Do NOT answer any question; just summarize potential answer-bearing info.

Text:
{text}

Your summary (make sure to include all important details / background information related. Just plain text, no formatting.))";

constexpr std::string_view kPredictBase =
    R"(Please answer the following question based on the provided summary.
Question:
{query}

Summary:
{summary}

Please respond in the following JSON format:
<briefly think about the information you have and the question you need to answer>

{
    "explanation": "<brief explanation of the answer. explain how you arrived at the answer. 1-2 sentences>",
    "answer": "<your final answer>"
}

Your answer (YOU MUST ONLY RESPOND WITH THE JSON OBJECT):)";

constexpr std::string_view kPredictMemory =
    R"(Please answer the following question based on the provided chat memory.

Question:
{query}

Memory:
{memory}

Please respond in the following JSON format:
<briefly think about the information you have and the question you need to answer>

{
    "answer": "<your final answer>"
}

Your answer (YOU MUST ONLY RESPOND WITH THE JSON OBJECT):)";

// Judge wording is our own; only the task (grade prediction vs. ground truth) is fixed.
constexpr std::string_view kJudge =
    R"(You are grading whether a predicted answer to a question is correct.
Compare the predicted answer with the ground-truth answer. Differences in wording, formatting or units are acceptable. Missing, extra-but-contradicting, or wrong key facts make the prediction incorrect.

Question:
{query}

Ground-truth answer:
{gold}

Predicted answer:
{prediction}

Respond with a JSON object of the form {"correct": true or false, "rationale": "<one sentence>"}.

Your verdict (YOU MUST ONLY RESPOND WITH THE JSON OBJECT):)";

constexpr std::string_view kFollowUp =
    R"(You are answering a question with the help of an assistant that can read a long document you cannot see. The assistant has sent you the summaries below.

Original question:
{query}

Information gathered so far:
{summary}

Decide which information that is still missing matters most for answering the original question, and ask the assistant one targeted follow-up question to obtain it.

Please respond in the following JSON format:
{"follow_up_query": "<your follow-up question>"}

Your follow-up (YOU MUST ONLY RESPOND WITH THE JSON OBJECT):)";

constexpr std::string_view kResearchPlan =
    R"(You are a research supervisor tasked with comprehensively exploring a research topic. Use a strategic, top-down approach to design your research.

Research Topic: {query}

**PHASE 1: RESEARCH PLANNING**
First, analyze this research topic and create a comprehensive research plan. Consider:
- What are the key areas that must be investigated to fully understand this topic?
- What specific objectives will guide your research?
- How do different aspects of this topic relate to each other?
- What types of information will be most valuable for a complete analysis?
- What is the logical flow for presenting findings?

**PHASE 2: STRATEGIC QUERY GENERATION**
Based on your research plan, generate EXACTLY 8 different search queries that together will provide comprehensive coverage of this topic. Each query should serve a specific strategic purpose in your overall research architecture.

For each search query, provide a specific sub-task/question that explains how it serves your research plan.

Return your response in this exact JSON format:
{
    "research_plan": "Your comprehensive research architecture and strategic objectives for investigating this topic. Explain the key areas to investigate, how they relate, and the logical structure for analysis.",
    "queries": [
        {
            "search_query": "specific search terms optimized for Google",
            "sub_task": "What specific question does this query address and how does it serve the research plan?"
        },
        {
            "search_query": "second strategic search query",
            "sub_task": "What does this query aim to discover and how does it fit the research architecture?"
        },
        {
            "search_query": "third targeted search query",
            "sub_task": "What aspect does this explore and why is it essential to the research plan?"
        },
        {
            "search_query": "fourth strategic search query",
            "sub_task": "What question does this answer and how does it complement other queries?"
        },
        {
            "search_query": "fifth focused search query",
            "sub_task": "What aspect does this cover and how does it build on previous queries?"
        },
        {
            "search_query": "sixth comprehensive search query",
            "sub_task": "What additional dimension does this explore and why is it crucial?"
        },
        {
            "search_query": "seventh strategic search query",
            "sub_task": "What specific gap does this fill in the research architecture?"
        },
        {
            "search_query": "eighth concluding search query",
            "sub_task": "What final aspect does this cover and how does it complete the comprehensive research?"
        }
    ],
    "synthesis_strategy": "Detailed strategy for combining findings from all 8 queries based on your research plan. Explain how the information will be structured, what relationships will be highlighted, and how the final analysis will be organized to maximize comprehensiveness and insight."
}

**Strategic Guidelines:**
1. Each search query should be 3-8 well-chosen keywords targeted for your specific research objectives
2. Design queries to serve complementary roles in your research architecture (not just generic dimensions)
3. Ensure queries are strategically coordinated to provide comprehensive topic coverage
4. Each sub-task should explain how the query serves your overall research plan
5. Create a synthesis strategy that reflects your planned research structure

**Research Focus Areas to Consider:**
- Foundational understanding and current state
- Key challenges, problems, or limitations
- Solutions, methodologies, and best practices
- Evidence, data, and empirical findings
- Future trends, developments, and implications
- Multiple perspectives and stakeholder viewpoints

CRITICAL: You must return ONLY the JSON object. Do NOT format it as a code block with ```json``` or any other markdown formatting. Return the raw JSON object directly.)";

constexpr std::string_view kResearchSynthesis =
    R"(You are tasked with creating a comprehensive, high-quality research report for a DeepResearch task. You have extensive research findings below - use ALL of them to create a detailed, thorough analysis.

**Original Research Task:** {original_task}

**Research Plan:** {research_plan}

**Research Findings:**
{qa_pairs}

**Synthesis Strategy:** {synthesis_strategy}

**COMPREHENSIVE INFORMATION UTILIZATION - ALL SOURCES REQUIRED:**
You must systematically work through ALL the provided research findings above. Do not selectively use only some information - your report must demonstrate that you have reviewed and integrated ALL relevant details, data points, examples, and perspectives from every query and source provided.

**REPORT STRUCTURE AND REQUIREMENTS:**
1. **Detailed Background Context** - Provide extensive background and context
2. **Comprehensive Analysis** - Multiple detailed sections covering all aspects
3. **Extensive Evidence Integration** - Use specific examples, data, quotes from ALL sources
4. **Thorough Implications Discussion** - Detailed analysis of implications and significance
5. **Complete Conclusions** - Comprehensive conclusions and future research directions

**WRITING REQUIREMENTS FOR HIGH QUALITY:**
- Write detailed explanations, not brief summaries
- Include extensive examples and case studies from the research
- Provide comprehensive background and context for every major point
- Use all statistical data, quotes, and specific details from the research findings
- Elaborate on implications, significance, and broader connections
- Include detailed analysis of methodologies, approaches, and frameworks mentioned
- Discuss limitations, challenges, and areas for further research extensively

Create a thorough academic research report that:
- Uses extensive detail and comprehensive analysis throughout
- Integrates ALL findings with detailed explanations and context
- Provides comprehensive coverage with extensive supporting evidence
- Includes detailed discussion of all relevant aspects and implications
- Demonstrates mastery of the subject through thorough, detailed analysis

**FINAL REQUIREMENT:**
Your response must be substantial and comprehensive. Write extensively with exhaustive detail, comprehensive analysis, and complete utilization of all research findings. Provide truly comprehensive coverage of the topic that demonstrates thorough understanding and integration of all available research.)";

constexpr std::string_view kSourceExtraction =
    R"(Your job is to extract detailed, specific information from the following content to support comprehensive research analysis.

**Main Research Query:** {query}
**Specific Sub-task/Question:** {sub_task}

## Content
{content}

**EXTRACTION REQUIREMENTS: Provide a detailed and comprehensive extraction that captures:**

**Factual Information:**
- Specific numbers, statistics, percentages, and quantitative data
- Dates, timelines, and chronological information
- Names of people, organizations, companies, and institutions
- Geographic locations, regions, and jurisdictions
- Technical specifications, measurements, and benchmarks

**Detailed Examples and Evidence:**
- Concrete case studies and real-world examples
- Specific research findings and study results
- Direct quotes and expert opinions
- Policy details and regulatory information
- Implementation details and methodologies

**Comprehensive Coverage:**
- Key facts directly relevant to both the main query AND the specific sub-task
- Important concepts, definitions, and explanations
- Cause-and-effect relationships and underlying mechanisms
- Trends, patterns, and developments over time
- Challenges, limitations, and problem areas identified

**Analytical Insights:**
- Implications and significance of the information
- Relationships between different data points
- Comparative information and benchmarks
- Future projections and forecasted trends
- Expert assessments and professional evaluations

Focus on depth and specificity while maintaining clarity. Extract comprehensive, specific information with extensive detail, numbers, examples, and evidence. Do not provide brief summaries - ensure your extraction is thorough and substantial. Extract information that would be valuable for creating a comprehensive research report. Pay special attention to information that directly addresses the sub-task question.

Return your extraction in JSON format with these fields:
- "explanation": Your detailed extraction of specific information, facts, data, examples, and evidence with extensive detail
- "answer": "relevant" if this content contains information relevant to the query and sub-task, "not relevant" otherwise

CRITICAL JSON FORMATTING RULES:
- Replace all double quotes (") inside text with single quotes (')
- Replace all newlines with spaces
- Ensure the JSON is valid and parseable
- Do NOT use line breaks within the JSON fields

Example format:
{"explanation": "Your detailed extraction with specific facts, numbers, examples, and evidence using single quotes for any nested quotes", "answer": "relevant"}

CRITICAL: You must return ONLY the JSON object. Do NOT format it as a code block with ```json``` or any other markdown formatting. Return the raw JSON object directly.)";

constexpr std::string_view kQaMemoryStyle =
    R"(You are a data generation assistant, tasked with building a benchmark that evaluates the memory capabilities of a language model.
You will be provided a list of previous chat conversations. Your goal is to generate a new synthetic query that has not appeared in previous chats, but nevertheless benefits from the information in previous chats.

CHATS:
{chats}

Generate a new synthetic query that has not appeared in previous chats, but nevertheless benefits from the information that has appeared in previous chats.
Do not generate a RAG query about existing data in the chats, but rather a new query that could leverage existing chat information as **memory**.

Please respond in the following JSON format:
<briefly think about the information you have and the question you can generate from it>

{
    "question": "<question>",
    "answer": "<answer>"
}
Your answer (YOU MUST ONLY RESPOND WITH THE JSON OBJECT):)";

constexpr std::string_view kQaWebStyle =
    R"(You are generating synthetic question-answer (QA) pairs from a source text.

SOURCE_TEXT:
{context}

Use only information from SOURCE_TEXT. No hallucinated facts.
Generate five questions and answers:
- Question 1: What is {topic} and why is it important? (type = "qa")
- Question 2: What is {topic} and how does it work? (type = "qa")
- Question 3: Write an email to a colleague summarizing the findings and take-aways. (type = "generation")
- Question 4: Generate rap lyrics that teach the core concepts. (type = "generation")
- Question 5: Generate a poem about the topic. (type = "generation")

Please respond in the following JSON format:
<briefly think about the information you have and questions you can generate from it>

{
    "questions": [
        {
            "topic": "<topic 1>",
            "question": "<question 1>",
            "answer": "<answer 1>",
            "type": "qa"
        },
        {
            "topic": "<topic 2>",
            "question": "<question 2>",
            "answer": "<answer 2>",
            "type": "qa"
        },
        {
            "topic": "<topic 3>",
            "question": "<question 3>",
            "answer": "<answer 3>",
            "type": "generation"
        },
        {
            "topic": "<topic 4>",
            "question": "<question 4>",
            "answer": "<answer 4>",
            "type": "generation"
        },
        {
            "topic": "<topic 5>",
            "question": "<question 5>",
            "answer": "<answer 5>",
            "type": "generation"
        }
    ]
}

Your answer (YOU MUST ONLY RESPOND WITH THE JSON OBJECT):)";

}  // namespace

std::string_view to_string(PromptRole role) {
    switch (role) {
        case PromptRole::compress_query_specific: return "compress_query_specific";
        case PromptRole::compress_memory: return "compress_memory";
        case PromptRole::compress_query_agnostic: return "compress_query_agnostic";
        case PromptRole::predict_base: return "predict_base";
        case PromptRole::predict_memory: return "predict_memory";
        case PromptRole::judge: return "judge";
        case PromptRole::follow_up: return "follow_up";
        case PromptRole::research_plan: return "research_plan";
        case PromptRole::source_extraction: return "source_extraction";
        case PromptRole::research_synthesis: return "research_synthesis";
        case PromptRole::qa_memory_style: return "qa_memory_style";
        case PromptRole::qa_web_style: return "qa_web_style";
    }
    return "unknown";
}

std::vector<std::string> required_placeholders(PromptRole role) {
    switch (role) {
        case PromptRole::compress_query_specific: return {"query", "text"};
        case PromptRole::compress_memory: return {"conversation"};
        case PromptRole::compress_query_agnostic: return {"text"};
        case PromptRole::predict_base: return {"query", "summary"};
        case PromptRole::predict_memory: return {"query", "memory"};
        case PromptRole::judge: return {"query", "gold", "prediction"};
        case PromptRole::follow_up: return {"query", "summary"};
        case PromptRole::research_plan: return {"query"};
        case PromptRole::source_extraction: return {"query", "sub_task", "content"};
        case PromptRole::research_synthesis: return {"original_task", "research_plan", "qa_pairs", "synthesis_strategy"};
        case PromptRole::qa_memory_style: return {"chats"};
        case PromptRole::qa_web_style: return {"context"};
    }
    return {};
}

bool is_compress_role(PromptRole role) {
    return role == PromptRole::compress_query_specific || role == PromptRole::compress_memory ||
           role == PromptRole::compress_query_agnostic;
}

bool is_predict_role(PromptRole role) {
    return role == PromptRole::predict_base || role == PromptRole::predict_memory;
}

void PromptTemplate::validate() const {
    for (const auto& name : required_placeholders(role)) {
        if (text.find("{" + name + "}") == std::string::npos) {
            throw ConfigError(std::string("templates.") + std::string(to_string(role)),
                              "missing placeholder {" + name + "}");
        }
    }
}

std::string PromptTemplate::render(const std::map<std::string, std::string, std::less<>>& values) const {
    std::string out;
    out.reserve(text.size());
    std::size_t k = 0;
    while (k < text.size()) {
        if (text[k] == '{') {
            const auto close = text.find('}', k + 1);
            if (close != std::string::npos) {
                const std::string_view name(text.data() + k + 1, close - k - 1);
                if (auto it = values.find(name); it != values.end()) {
                    out += it->second;
                    k = close + 1;
                    continue;
                }
            }
        }
        out += text[k++];
    }
    return out;
}

PromptTemplate PromptTemplate::builtin(PromptRole role) {
    std::string_view text;
    switch (role) {
        case PromptRole::compress_query_specific: text = kCompressQuerySpecific; break;
        case PromptRole::compress_memory: text = kCompressMemory; break;
        case PromptRole::compress_query_agnostic: text = kCompressQueryAgnostic; break;
        case PromptRole::predict_base: text = kPredictBase; break;
        case PromptRole::predict_memory: text = kPredictMemory; break;
        case PromptRole::judge: text = kJudge; break;
        case PromptRole::follow_up: text = kFollowUp; break;
        case PromptRole::research_plan: text = kResearchPlan; break;
        case PromptRole::source_extraction: text = kSourceExtraction; break;
        case PromptRole::research_synthesis: text = kResearchSynthesis; break;
        case PromptRole::qa_memory_style: text = kQaMemoryStyle; break;
        case PromptRole::qa_web_style: text = kQaWebStyle; break;
    }
    return PromptTemplate{role, std::string(text)};
}

std::string conciseness_instruction(Conciseness c) {
    switch (c) {
        case Conciseness::concise3: return "Your summary must be exactly 3 sentences long.";
        case Conciseness::normal6: return "Your summary must be exactly 6 sentences long.";
        case Conciseness::elaborate9: return "Your summary must be exactly 9 sentences long.";
        case Conciseness::unconstrained: return "";
    }
    return "";
}

}  // namespace compresslab
