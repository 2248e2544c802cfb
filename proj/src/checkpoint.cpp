#include <map>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"
#include "text_util.hpp"

namespace pitchlab::io {

namespace {

constexpr const char* kMagic = "# pitchlab checkpoint v1";

using Meta = std::map<std::string, std::string>;

std::string format_checkpoint(const std::string& kind, const Meta& meta, const nn::ParamSet& p) {
  std::string out = std::string(kMagic) + "\nkind," + kind + "\n";
  for (const auto& [k, v] : meta) out += "meta," + k + "," + v + "\n";
  for (std::size_t i = 0; i < p.num_tensors(); ++i) {
    const auto& s = p.specs()[i];
    out += "tensor," + s.name + "," + std::to_string(s.rows) + "," + std::to_string(s.cols) + "\n";
    const auto m = p.mat(i);
    for (nn::Index r = 0; r < s.rows; ++r) {
      for (nn::Index c = 0; c < s.cols; ++c) {
        if (c > 0) out += ',';
        out += detail::fmt("%.17g", m(r, c));
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

struct Parsed {
  std::string kind;
  Meta meta;
  std::map<std::string, nn::Matrix> tensors;
};

Parsed parse_checkpoint(const fs::path& path) {
  const std::string text = detail::read_file(path);
  const std::string src = path.string();
  detail::LineReader lines(text);
  std::string_view line;
  const auto fail = [&](const std::string& why) { return ParseError(src, lines.line_no(), why); };
  if (!lines.next(line) || line != kMagic) throw fail("missing checkpoint header");
  Parsed out;
  if (!lines.next(line)) throw fail("missing kind line");
  auto f = detail::split_csv(line);
  if (f.size() != 2 || f[0] != "kind") throw fail("expected 'kind,<name>'");
  out.kind = std::string(f[1]);
  bool ended = false;
  while (lines.next(line)) {
    if (line.empty()) continue;
    if (line == "end") {
      ended = true;
      break;
    }
    f = detail::split_csv(line);
    if (f[0] == "meta") {
      if (f.size() != 3) throw fail("expected 'meta,<key>,<value>'");
      out.meta[std::string(f[1])] = std::string(f[2]);
    } else if (f[0] == "tensor") {
      if (f.size() != 4) throw fail("expected 'tensor,<name>,<rows>,<cols>'");
      const auto rows = detail::parse_int<nn::Index>(f[2]);
      const auto cols = detail::parse_int<nn::Index>(f[3]);
      if (!rows || !cols || *rows < 0 || *cols < 0) throw fail("bad tensor shape");
      nn::Matrix m(*rows, *cols);
      for (nn::Index r = 0; r < *rows; ++r) {
        if (!lines.next(line)) throw fail("truncated tensor " + std::string(f[1]));
        const auto vals = detail::split_csv(line);
        if (static_cast<nn::Index>(vals.size()) != *cols) throw fail("tensor row has the wrong width");
        for (nn::Index c = 0; c < *cols; ++c) {
          const auto v = detail::parse_double(vals[static_cast<std::size_t>(c)]);
          if (!v) throw fail("bad tensor value '" + std::string(vals[static_cast<std::size_t>(c)]) + "'");
          m(r, c) = *v;
        }
      }
      out.tensors[std::string(f[1])] = std::move(m);
    } else {
      throw fail("unexpected line");
    }
  }
  if (!ended) throw ParseError(src, lines.line_no(), "missing 'end' marker");
  return out;
}

void load_tensors(const Parsed& in, nn::ParamSet& p, const std::string& src) {
  if (in.tensors.size() != p.num_tensors()) {
    throw ParseError(src, 0, "checkpoint holds " + std::to_string(in.tensors.size()) + " tensors, model expects " +
                                 std::to_string(p.num_tensors()));
  }
  for (std::size_t i = 0; i < p.num_tensors(); ++i) {
    const auto& s = p.specs()[i];
    const auto it = in.tensors.find(s.name);
    if (it == in.tensors.end()) throw ParseError(src, 0, "missing tensor " + s.name);
    if (it->second.rows() != s.rows || it->second.cols() != s.cols) {
      throw ParseError(src, 0, "tensor " + s.name + " has the wrong shape");
    }
    p.mat(i) = it->second;
  }
}

template <typename T>
T meta_num(const Parsed& in, const std::string& key, const std::string& src) {
  const auto it = in.meta.find(key);
  if (it == in.meta.end()) throw ParseError(src, 0, "missing meta " + key);
  if constexpr (std::is_floating_point_v<T>) {
    const auto v = detail::parse_double(it->second);
    if (!v) throw ParseError(src, 0, "bad meta " + key);
    return *v;
  } else {
    const auto v = detail::parse_int<T>(it->second);
    if (!v) throw ParseError(src, 0, "bad meta " + key);
    return *v;
  }
}

}  // namespace

void write_imputer(const fs::path& path, const imputation::ImputerParams& p) {
  const auto& c = p.config();
  const Meta meta{{"latent_dim", std::to_string(c.latent_dim)},
                  {"hidden_dim", std::to_string(c.hidden_dim)},
                  {"beta", detail::fmt("%.17g", c.beta)},
                  {"lambda_smooth", detail::fmt("%.17g", c.lambda_smooth)},
                  {"lambda_form", detail::fmt("%.17g", c.lambda_form)},
                  {"lambda_coll", detail::fmt("%.17g", c.lambda_coll)},
                  {"collision_radius", detail::fmt("%.17g", c.collision_radius)}};
  detail::write_file(path, format_checkpoint("imputer", meta, p.params()));
}

imputation::ImputerParams read_imputer(const fs::path& path) {
  const auto in = parse_checkpoint(path);
  const std::string src = path.string();
  if (in.kind != "imputer") throw ParseError(src, 2, "checkpoint kind is '" + in.kind + "', expected 'imputer'");
  imputation::LatentConfig c;
  c.latent_dim = meta_num<std::size_t>(in, "latent_dim", src);
  c.hidden_dim = meta_num<std::size_t>(in, "hidden_dim", src);
  c.beta = meta_num<double>(in, "beta", src);
  c.lambda_smooth = meta_num<double>(in, "lambda_smooth", src);
  c.lambda_form = meta_num<double>(in, "lambda_form", src);
  c.lambda_coll = meta_num<double>(in, "lambda_coll", src);
  c.collision_radius = meta_num<double>(in, "collision_radius", src);
  imputation::ImputerParams p(c);
  load_tensors(in, p.params(), src);
  return p;
}

void write_bc(const fs::path& path, const rollout::BCParams& p) {
  const Meta meta{{"context_frames", std::to_string(p.context_frames())},
                  {"hidden_dim", std::to_string(p.hidden_dim())},
                  {"velocity_scale", detail::fmt("%.17g", p.velocity_scale())}};
  detail::write_file(path, format_checkpoint("bc", meta, p.params()));
}

rollout::BCParams read_bc(const fs::path& path) {
  const auto in = parse_checkpoint(path);
  const std::string src = path.string();
  if (in.kind != "bc") throw ParseError(src, 2, "checkpoint kind is '" + in.kind + "', expected 'bc'");
  rollout::BCParams p(meta_num<std::size_t>(in, "context_frames", src), meta_num<std::size_t>(in, "hidden_dim", src),
                      meta_num<double>(in, "velocity_scale", src));
  load_tensors(in, p.params(), src);
  return p;
}

}  // namespace pitchlab::io
