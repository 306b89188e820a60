#pragma once

// Model checkpoint text format (lines starting with '#' are comments):
//   alent-model 1
//   config <vocab> <context> <feature_dim> <hidden> <left> <right>
//   block <name> <size>
//   <size reals>
// with one block record per parameter block, in declaration order.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "alent/corpus.hpp"
#include "alent/error.hpp"
#include "alent/model.hpp"

namespace alent {

inline void write_model(std::ostream& os, const ToyModel& m) {
  const auto& c = m.config();
  os << "alent-model 1\n";
  os << "config " << c.vocab << ' ' << c.context << ' ' << c.feature_dim << ' ' << c.hidden << ' '
     << c.left << ' ' << c.right << '\n';
  m.params().for_each_block([&](const char* name, const std::vector<double>& b) {
    os << "block " << name << ' ' << b.size() << '\n';
    for (std::size_t i = 0; i < b.size(); ++i) os << (i ? " " : "") << format_real(b[i]);
    os << '\n';
  });
}

inline ToyModel read_model(std::istream& is) {
  std::string line;
  const auto next = [&](const char* what) {
    while (std::getline(is, line)) {
      const auto p = line.find_first_not_of(" \t\r");
      if (p != std::string::npos && line[p] != '#') return std::istringstream(line);
    }
    throw Error(ErrorCode::Parse, std::string("checkpoint ends before ") + what);
  };

  {
    auto ls = next("header");
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != "alent-model" || version != 1)
      throw Error(ErrorCode::Parse, "not an alent-model 1 checkpoint");
  }
  ModelConfig cfg;
  {
    auto ls = next("config");
    std::string tag;
    if (!(ls >> tag >> cfg.vocab >> cfg.context >> cfg.feature_dim >> cfg.hidden >> cfg.left >>
          cfg.right) ||
        tag != "config")
      throw Error(ErrorCode::Parse, "bad checkpoint config line");
  }
  cfg.validate();
  auto params = ModelParams::zeros(cfg);
  params.for_each_block([&](const char* name, std::vector<double>& b) {
    auto hs = next(name);
    std::string tag, got;
    std::size_t n = 0;
    if (!(hs >> tag >> got >> n) || tag != "block" || got != name)
      throw Error(ErrorCode::Parse, std::string("expected block ") + name);
    if (n != b.size())
      throw Error(ErrorCode::DimMismatch, std::string("block ") + name + " has " + std::to_string(n) +
                                              " values, config needs " + std::to_string(b.size()));
    auto vs = next(name);
    for (auto& v : b) {
      std::string tok;
      if (!(vs >> tok)) throw Error(ErrorCode::Parse, std::string("short block ") + name);
      v = parse_real(tok);
    }
  });
  return ToyModel(cfg, std::move(params));
}

}  // namespace alent
