#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unistd.h>

#include "lossprobe/error.hpp"
#include "lossprobe/toymodel.hpp"

namespace lossprobe::testing {

// Runs fn and returns the Errc it threw, or nullopt when it returned normally.
inline std::optional<Errc> errc_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Small motif corpus and a model trained on it, shared across tests.
struct ToyFixture {
  toy::CorpusConfig cfg;
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> heldout;
  std::shared_ptr<const toy::NGramModel> model;
};

inline const ToyFixture& toy_fixture() {
  static const ToyFixture fx = [] {
    ToyFixture f;
    f.cfg.repeats_per_seq = 40;
    f.cfg.n_sequences = 120;
    f.cfg.seed = 7;
    f.train = toy::gen_corpus(f.cfg);
    auto held = f.cfg;
    held.n_sequences = 30;
    held.noise_mix_fraction = 0.0;
    f.heldout = toy::gen_corpus(held, f.cfg.n_sequences);
    f.model = std::make_shared<const toy::NGramModel>(toy::train_ngram(f.train, 3, 0.1));
    return f;
  }();
  return fx;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lossprobe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lossprobe::testing
