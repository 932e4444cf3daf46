#pragma once

// Chat prompt templates for the remote generator and critic. The factual
// generator's sentence count is a parameter.

#include <string>
#include <vector>

#include "rlac/error.hpp"

namespace rlac::bridge {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

inline std::string count_word(std::size_t n) {
  static const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                "six",  "seven", "eight", "nine",  "ten"};
  return n <= 10 ? words[n] : std::to_string(n);
}

inline std::vector<ChatMessage> factual_generator_prompt(const std::string& topic, std::size_t sentences) {
  if (sentences == 0) throw Error(ErrorCode::Config, "sentence count must be positive");
  return {{"system",
           "You are an AI assistant that provides accurate and concise biographies \n"
           "of individuals. Each biography should be exactly " +
               count_word(sentences) +
               " sentences \n"
               "long, highlighting key aspects of the person's life, achievements, and \n"
               "significance."},
          {"user", "Write a biography of " + topic + "."}};
}

/// The problem statement is passed through unchanged.
inline std::vector<ChatMessage> code_generator_prompt(const std::string& problem_statement) {
  return {{"user", problem_statement}};
}

/// "[1] first\n[2] second..." numbering used by the critic prompt.
inline std::string number_paragraph(const std::vector<std::string>& sentences) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += "\n";
    out += "[" + std::to_string(i + 1) + "] " + sentences[i];
  }
  return out;
}

/// Splits on '.', '!' or '?' followed by whitespace or end of text.
inline std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) out.push_back(cur.substr(b, cur.find_last_not_of(" \t\r\n") - b + 1));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur += text[i];
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' || text[i + 1] == '\t'))
      flush();
  }
  flush();
  return out;
}

inline std::vector<ChatMessage> factual_critic_prompt(const std::string& topic, const std::string& numbered_paragraph) {
  return {{"system",
           "You are a factual checker. Based on your existing knowledge, \n"
           "identify exactly one sentence that contains the most clearly \n"
           "verifiable factual error in the paragraph.\n"
           "Return your answer in **exactly three lines**:\n"
           "reason:  < briefly explaining what is wrong >\n"
           "sentence: N         N is the number of the most incorrect sentence\n"
           "(positive integer)\n"
           "error_fact: F       a brief clause (no more than 8 words) capturing the \n"
           "wrong claim from that sentence"},
          {"user",
           "Here is an example to show the task.\n"
           "Find the sentence that contains the most clearly verifiable factual error \n"
           "in the paragraph about Albert Einstein.\n"
           "\n"
           "Example paragraph:\n"
           "[1] Albert Einstein was awarded the Nobel Prize in Physics in 1921 for his discovery of the "
           "photoelectric effect.\n"
           "[2] He was born in New York City, United States, and later moved to Europe where he continued his "
           "studies.\n"
           "[3] Einstein developed the theory of relativity, revolutionizing our understanding of space, time, and "
           "gravity.\n"
           "[4] His famous equation describes the equivalence of mass and energy.\n"
           "\n"
           "Expected answer:\n"
           "reason: Einstein was actually born in Ulm, Germany, not New York City.\n"
           "sentence: 2\n"
           "error_fact: Albert Einstein was born in New York City.\n"
           "\n"
           "Now apply the same procedure to the paragraph below about " +
               topic +
               ".\n"
               "\n"
               "Paragraph:\n" +
               numbered_paragraph +
               "\n"
               "\n"
               "Answer:"}};
}

inline std::vector<ChatMessage> code_critic_prompt(const std::string& question, const std::string& code,
                                                   const std::string& examples_block = "") {
  return {{"system",
           "You are a code critic. Analyze code for bugs and generate failing test \n"
           "cases. \n"
           "Strictly follow the format with <think> and <testcase> tags."},
          {"user",
           "Analyze the given problem and the generated code to find a test case that \n"
           "would cause the code to fail.\n"
           "\n"
           "Problem: " +
               question +
               "\n"
               "\n"
               "Generated code:\n"
               "```python\n" +
               code +
               "\n"
               "```\n"
               "First, think through potential bugs and edge cases in <think> </think> \n"
               "tags.\n"
               "Then output exactly ONE failing test case inside <testcase> tags using \n"
               "this format:\n"
               "\n"
               "Option A (CALL format)\n"
               "<testcase> CALL: func_name(arg1, arg2, kw=val) </testcase>\n"
               "Option B (STDIN format)\n"
               "<testcase> STDIN: <raw input here> </testcase>\n"
               "\n"
               "Do NOT include expected outputs or explanations.\n" +
               examples_block}};
}

}  // namespace rlac::bridge
