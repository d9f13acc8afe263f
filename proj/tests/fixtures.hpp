#ifndef QAE_TESTS_FIXTURES_HPP
#define QAE_TESTS_FIXTURES_HPP

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "qae/codec.hpp"
#include "qae/core.hpp"

namespace qae::test {

inline const std::filesystem::path kSourceDir = QAE_SOURCE_DIR;

// "Q1 O A1" -> labels
inline LabelSequence L(const std::string &text) {
  LabelSequence out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(*parse_label_surface(tok));
  return out;
}

inline Session s1() {
  using enum SpeakerRole;
  return make_session("S1", {{Customer, "Hi, my package hasn't arrived?"},
                             {Agent, "Let me check."},
                             {Agent, "It will arrive tomorrow."},
                             {Customer, "Also how do I get a refund?"},
                             {Agent, "Go to the orders page."},
                             {Customer, "Thanks."}});
}

inline LabelSequence s1_labels() { return L("Q1 O A1 Q2 A2 O"); }

// Roles as "CACA".
inline Session session_from_roles(const std::string &id, const std::string &roles) {
  std::vector<std::pair<SpeakerRole, std::string>> turns;
  for (std::size_t i = 0; i < roles.size(); ++i)
    turns.emplace_back(roles[i] == 'C' ? SpeakerRole::Customer : SpeakerRole::Agent,
                       "utterance " + std::to_string(i + 1));
  return make_session(id, std::move(turns));
}

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_file(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh scratch directory per call, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("qae_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Random label sequence over {O, Q1..Qk, A1..Ak}.
inline LabelSequence random_labels(std::mt19937_64 &rng, std::size_t n, int max_id) {
  std::uniform_int_distribution<int> kind(0, 2), id(1, max_id);
  LabelSequence out;
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind(rng)) {
      case 0: out.push_back(QALabel::outside()); break;
      case 1: out.push_back(QALabel::question(id(rng))); break;
      default: out.push_back(QALabel::answer(id(rng))); break;
    }
  }
  return out;
}

inline Session random_session(std::mt19937_64 &rng, const std::string &id, std::size_t n) {
  std::bernoulli_distribution coin;
  std::string roles;
  for (std::size_t i = 0; i < n; ++i) roles += coin(rng) ? 'C' : 'A';
  return session_from_roles(id, roles);
}

// Random exclusive pairs over 1..n; every pair has a question.
inline std::vector<QAPair> random_pairs(std::mt19937_64 &rng, std::size_t n) {
  std::uniform_int_distribution<int> n_pairs(0, static_cast<int>(std::max<std::size_t>(1, n / 2)));
  const int m = n_pairs(rng);
  std::vector<IndexSet> qs(m), as(m);
  std::uniform_int_distribution<int> owner(-1, m - 1);
  std::bernoulli_distribution coin;
  for (std::size_t i = 1; i <= n; ++i) {
    int k = owner(rng);
    if (k < 0) continue;
    (coin(rng) ? qs[k] : as[k]).push_back(i);
  }
  std::vector<QAPair> out;
  for (int k = 0; k < m; ++k) {
    if (qs[k].empty()) continue;  // answer-only groups are not valid pairs
    out.push_back(make_qa_pair(k + 1, qs[k], as[k]));
  }
  std::sort(out.begin(), out.end(), [](const QAPair &a, const QAPair &b) {
    return a.question_indices.front() < b.question_indices.front();
  });
  return out;
}

}  // namespace qae::test

#endif  // QAE_TESTS_FIXTURES_HPP
