// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

// adlm_synth: shared-grammar text with a per-domain proper-noun inventory.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"adlm_synth: synthetic domain corpora"};
  int domain = 0;
  std::size_t nouns = 40;
  std::size_t lines = 2000;
  std::uint64_t seed = 1;
  std::string out;
  std::string nouns_out;
  std::string testset_prefix;
  app.add_option("--domain-index", domain, "Noun inventory (0, 1, ...)")->capture_default_str();
  app.add_option("--nouns", nouns, "Inventory size")->capture_default_str();
  app.add_option("--lines", lines, "Lines to generate")->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--out", out, "Text output, one line per utterance")->required();
  app.add_option("--nouns-out", nouns_out, "Write the noun inventory here");
  app.add_option("--testset-prefix", testset_prefix, "Write utt_id<TAB>text with ids <prefix><n> instead of plain text");
  CLI11_PARSE(app, argc, argv);

  const adlm::synth::DomainText text = adlm::synth::make_domain(domain, nouns, lines, seed);
  std::ofstream os(out);
  if (!os) {
    std::cerr << "cannot open " << out << '\n';
    return 3;
  }
  for (std::size_t i = 0; i < text.lines.size(); ++i) {
    if (!testset_prefix.empty()) os << testset_prefix << i << '\t';
    os << text.lines[i] << '\n';
  }
  if (!nouns_out.empty()) {
    std::ofstream ns(nouns_out);
    for (const auto& n : text.nouns) ns << n << '\n';
  }
  return 0;
}
