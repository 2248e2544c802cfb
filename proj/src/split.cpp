#include <algorithm>
#include <random>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"
#include "text_util.hpp"

namespace pitchlab::io {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::size_t SplitManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [s](const auto& kv) { return kv.second == s; }));
}

std::vector<std::string> SplitManifest::matches(Split s) const {
  std::vector<std::string> out;
  for (const auto& [id, split] : assignment) {
    if (split == s) out.push_back(id);
  }
  return out;
}

SplitManifest split_dataset(std::vector<std::string> match_ids, std::uint64_t seed) {
  std::sort(match_ids.begin(), match_ids.end());
  match_ids.erase(std::unique(match_ids.begin(), match_ids.end()), match_ids.end());
  const std::size_t n = match_ids.size();
  if (n < 3) throw Error(ErrorCode::TooFewMatches, "need at least 3 distinct matches, got " + std::to_string(n));

  // Fisher-Yates with an explicit modulus draw so the permutation depends only
  // on the engine, not on the standard library's distribution code.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(match_ids[i], match_ids[j]);
  }
  const std::size_t n_train = 7 * n / 10;
  const std::size_t n_test = 3 * n / 20;
  const std::size_t n_val = n - n_train - n_test;

  SplitManifest m;
  m.seed = seed;
  for (std::size_t k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    m.assignment.emplace(match_ids[k], s);
  }
  return m;
}

void write_manifest(const fs::path& path, const SplitManifest& m) {
  std::string out = "# pitchlab split v1\nseed," + std::to_string(m.seed) + "\nmatch_id,split\n";
  for (const auto& [id, split] : m.assignment) out += id + "," + to_string(split) + "\n";
  detail::write_file(path, out);
}

SplitManifest read_manifest(const fs::path& path) {
  const std::string text = detail::read_file(path);
  detail::LineReader lines(text);
  std::string_view line;
  const auto fail = [&](const std::string& why) { return ParseError(path.string(), lines.line_no(), why); };
  if (!lines.next(line) || line != "# pitchlab split v1") throw fail("missing split header");
  SplitManifest m;
  if (!lines.next(line)) throw fail("missing seed line");
  auto f = detail::split_csv(line);
  const auto seed = f.size() == 2 && f[0] == "seed" ? detail::parse_int<std::uint64_t>(f[1]) : std::nullopt;
  if (!seed) throw fail("expected 'seed,<integer>'");
  m.seed = *seed;
  if (!lines.next(line) || line != "match_id,split") throw fail("expected 'match_id,split'");
  while (lines.next(line)) {
    if (line.empty()) continue;
    f = detail::split_csv(line);
    if (f.size() != 2 || f[0].empty()) throw fail("expected '<match_id>,<split>'");
    Split s;
    if (f[1] == "train") s = Split::Train;
    else if (f[1] == "val") s = Split::Val;
    else if (f[1] == "test") s = Split::Test;
    else throw fail("unknown split '" + std::string(f[1]) + "'");
    if (!m.assignment.emplace(std::string(f[0]), s).second) throw fail("duplicate match id");
  }
  return m;
}

}  // namespace pitchlab::io
