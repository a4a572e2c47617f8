#include "specprint/arch_dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "specprint/dft.hpp"

namespace specprint {

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : DataError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      detail_(message) {}

const char* to_string(PadKind k) { return k == PadKind::zero ? "zero" : "circular"; }

namespace {

struct Token {
  enum Kind { ident, number, punct, end } kind = end;
  std::string text;
  std::size_t line = 1, column = 1;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&] {
    if (s[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      advance();
    } else if (c == '#') {
      while (i < s.size() && s[i] != '\n') advance();
    } else if (std::isalpha(c) || c == '_') {
      Token t{Token::ident, "", line, col};
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) {
        t.text += s[i];
        advance();
      }
      out.push_back(std::move(t));
    } else if (std::isdigit(c)) {
      Token t{Token::number, "", line, col};
      while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i]))) {
        t.text += s[i];
        advance();
      }
      out.push_back(std::move(t));
    } else if (c == '(' || c == ')' || c == ',' || c == '=') {
      out.push_back({Token::punct, std::string(1, static_cast<char>(c)), line, col});
      advance();
    } else {
      throw ParseError(line, col, std::string("unexpected character '") + static_cast<char>(c) + "'");
    }
  }
  out.push_back({Token::end, "", line, col});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  ArchSpec run() {
    ArchSpec spec;
    expect_ident("input");
    expect("(");
    spec.channels = positive("channel count");
    expect(",");
    spec.height = positive("height");
    expect(",");
    spec.width = positive("width");
    expect(")");
    if (spec.height > kMaxResolution || spec.width > kMaxResolution)
      throw error(toks_[pos_ - 1], "resolution exceeds " + std::to_string(kMaxResolution));
    std::size_t h = spec.height, w = spec.width;
    while (peek().kind != Token::end) {
      const Token& start = peek();
      spec.blocks.push_back(block());
      h *= 2;
      w *= 2;
      if (h > kMaxResolution || w > kMaxResolution)
        throw error(start, "resolution overflow: block " + std::to_string(spec.blocks.size()) +
                               " outputs " + std::to_string(h) + "x" + std::to_string(w) +
                               ", limit " + std::to_string(kMaxResolution));
    }
    if (spec.blocks.empty()) throw error(peek(), "expected at least one block");
    return spec;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (t.kind != Token::end) ++pos_;
    return t;
  }
  static ParseError error(const Token& t, const std::string& msg) {
    return ParseError(t.line, t.column, msg);
  }
  static std::string describe(const Token& t) {
    return t.kind == Token::end ? "end of input" : "'" + t.text + "'";
  }
  void expect(const char* p) {
    const Token& t = next();
    if (t.kind != Token::punct || t.text != p)
      throw error(t, std::string("expected '") + p + "', found " + describe(t));
  }
  void expect_ident(const char* word) {
    const Token& t = next();
    if (t.kind != Token::ident || t.text != word)
      throw error(t, std::string("expected '") + word + "', found " + describe(t));
  }
  std::size_t integer(const Token& t, const std::string& what) {
    if (t.kind != Token::number) throw error(t, "expected an integer for " + what + ", found " + describe(t));
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec == std::errc::result_out_of_range || (ec == std::errc() && v > 1'000'000'000))
      throw error(t, "integer out of range for " + what);
    if (ec != std::errc() || p != t.text.data() + t.text.size())
      throw error(t, "malformed integer " + describe(t));
    return v;
  }
  std::size_t positive(const std::string& what) {
    const Token& t = next();
    const std::size_t v = integer(t, what);
    if (v == 0) throw error(t, what + " must be at least 1");
    return v;
  }

  template <typename E>
  E enum_value(const Token& t, const std::string& key,
               std::initializer_list<std::pair<const char*, E>> options) {
    if (t.kind == Token::ident)
      for (const auto& [name, value] : options)
        if (t.text == name) return value;
    if (t.kind == Token::ident || t.kind == Token::number)
      throw error(t, "unknown enum value '" + t.text + "' for " + key);
    throw error(t, "expected a value for " + key + ", found " + describe(t));
  }

  BlockSpec block() {
    const Token& start = next();
    if (start.kind != Token::ident || start.text != "block")
      throw error(start, "expected 'block', found " + describe(start));
    expect("(");
    BlockSpec b;
    std::vector<std::string> seen;
    for (;;) {
      const Token& key = next();
      if (key.kind != Token::ident) throw error(key, "expected a key, found " + describe(key));
      static const char* kKeys[] = {"u", "k", "ch", "pad", "norm", "act", "sc", "seq"};
      bool known = false;
      for (const char* k : kKeys) known |= key.text == k;
      if (!known) throw error(key, "unknown key '" + key.text + "'");
      for (const auto& s : seen)
        if (s == key.text) throw error(key, "duplicate key '" + key.text + "'");
      seen.push_back(key.text);
      expect("=");
      const Token& v = next();
      const std::string& k = key.text;
      if (k == "u") {
        b.u = enum_value<UpsampleKind>(v, k, {{"nearest", UpsampleKind::nearest},
                                              {"bilinear", UpsampleKind::bilinear},
                                              {"deconv", UpsampleKind::deconv}});
      } else if (k == "k") {
        b.k = integer(v, "k");
        if (b.k % 2 == 0) throw error(v, "kernel size must be odd");
      } else if (k == "ch") {
        b.ch = integer(v, "ch");
        if (b.ch == 0) throw error(v, "ch must be at least 1");
      } else if (k == "pad") {
        b.pad = enum_value<PadKind>(v, k, {{"zero", PadKind::zero}, {"circular", PadKind::circular}});
      } else if (k == "norm") {
        b.norm = enum_value<NormKind>(
            v, k, {{"none", NormKind::none}, {"batch", NormKind::batch}, {"instance", NormKind::instance}});
      } else if (k == "act") {
        b.act = enum_value<ActKind>(v, k, {{"none", ActKind::none}, {"relu", ActKind::relu},
                                           {"sigmoid", ActKind::sigmoid}, {"tanh", ActKind::tanh}});
      } else if (k == "sc") {
        b.sc = enum_value<bool>(v, k, {{"true", true}, {"false", false}});
      } else {
        b.seq = enum_value<BlockOrder>(v, k, {{"pre", BlockOrder::pre}, {"post", BlockOrder::post}});
      }
      const Token& sep = next();
      if (sep.kind == Token::punct && sep.text == ")") break;
      if (sep.kind != Token::punct || sep.text != ",")
        throw error(sep, "expected ',' or ')', found " + describe(sep));
    }
    for (const char* req : {"u", "k", "ch"}) {
      bool found = false;
      for (const auto& s : seen) found |= s == req;
      if (!found) throw error(start, std::string("missing required key '") + req + "'");
    }
    return b;
  }
};

Tensor3 channel_broadcast(const Matrix& m, std::size_t channels) {
  Tensor3 out(channels, m.rows(), m.cols());
  for (std::size_t c = 0; c < channels; ++c) out.set_channel(c, m);
  return out;
}

void add_into(Tensor3& a, const Tensor3& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += b.values()[i];
}

Tensor3 upsample_with(const Tensor3& x, const UpsampleMode& mode, PadKind pad) {
  return pad == PadKind::zero ? upsample_clamped(x, mode) : upsample_circular(x, mode);
}

// Repeat to 2M x 2N and multiply by a transfer magnitude.
Matrix repeat_times(const Matrix& s, const Matrix& transfer) {
  const std::size_t m = s.rows(), n = s.cols();
  Matrix out(2 * m, 2 * n);
  for (std::size_t u = 0; u < 2 * m; ++u)
    for (std::size_t v = 0; v < 2 * n; ++v) out(u, v) = s(u % m, v % n) * transfer(u, v);
  return out;
}

void multiply_into(Matrix& s, const Matrix& t) {
  for (std::size_t i = 0; i < s.size(); ++i) s.values()[i] *= t.values()[i];
}

// Unit variance, zero mean: sum of non-DC |F|^2 is (MN)^2 times the variance. No eps, so
// the result is exactly scale free.
void normalize_spectrum(Matrix& s) {
  const double area = static_cast<double>(s.size());
  double energy = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) energy += s.values()[i] * s.values()[i];
  const double var = energy / (area * area);
  s.values()[0] = 0.0;
  if (var == 0.0) return;
  const double inv = 1.0 / std::sqrt(var);
  for (double& v : s.values()) v *= inv;
}

}  // namespace

ArchSpec parse_arch(std::string_view text) { return Parser(text).run(); }

std::string print_arch(const ArchSpec& spec) {
  if (spec.blocks.empty()) throw DataError("an architecture needs at least one block");
  std::ostringstream os;
  os << "input(" << spec.channels << ',' << spec.height << ',' << spec.width << ")\n";
  for (const auto& b : spec.blocks)
    os << "block(u=" << to_string(b.u) << ",k=" << b.k << ",ch=" << b.ch << ",pad=" << to_string(b.pad)
       << ",norm=" << to_string(b.norm) << ",act=" << to_string(b.act) << ",sc=" << (b.sc ? "true" : "false")
       << ",seq=" << to_string(b.seq) << ")\n";
  return os.str();
}

std::size_t component_count(const ArchSpec& spec) {
  std::size_t n = 0;
  for (const auto& b : spec.blocks)
    n += 2 + (b.norm != NormKind::none) + (b.act != ActKind::none) + (b.sc ? 1 : 0);
  return n;
}

ArchModel ArchModel::instantiate(const ArchSpec& spec, Rng& rng) {
  if (spec.blocks.empty()) throw DataError("an architecture needs at least one block");
  ArchModel m;
  m.spec = spec;
  std::size_t ch = spec.channels;
  for (const auto& b : spec.blocks) {
    if (b.u == UpsampleKind::deconv)
      m.deconv.emplace_back(ConvKernel::random(ch, ch, 4, rng));
    else
      m.deconv.emplace_back(std::nullopt);
    m.conv.push_back(ConvKernel::random(ch, b.ch, b.k, rng));
    ch = b.ch;
  }
  return m;
}

SimResult forward_sim(const ArchModel& model, const Tensor3& input) {
  const ArchSpec& spec = model.spec;
  if (input.channels() != spec.channels || input.height() != spec.height || input.width() != spec.width)
    throw DataError("input is " + std::to_string(input.channels()) + "x" + std::to_string(input.height()) +
                    "x" + std::to_string(input.width()) + ", architecture expects " +
                    std::to_string(spec.channels) + "x" + std::to_string(spec.height) + "x" +
                    std::to_string(spec.width));
  SimResult r;
  Tensor3 x = input;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const BlockSpec& b = spec.blocks[i];
    const std::string p = "b" + std::to_string(i + 1) + ".";
    const Tensor3 block_in = x;
    const UpsampleMode mode = b.u == UpsampleKind::deconv ? UpsampleMode::deconvolution(*model.deconv[i])
                              : b.u == UpsampleKind::bilinear ? UpsampleMode::bilinear()
                                                              : UpsampleMode::nearest();
    x = upsample_with(x, mode, b.pad);
    r.taps.emplace_back(p + "up." + to_string(b.u), x);

    auto conv = [&] {
      x = conv2_spatial(x, model.conv[i], b.pad == PadKind::zero ? PaddingMode::zero_same : PaddingMode::circular);
      r.taps.emplace_back(p + "conv", x);
    };
    auto norm_act = [&] {
      if (b.norm != NormKind::none) {
        x = normalize(x, NormParams::make(b.norm, x.channels()));
        r.taps.emplace_back(p + "norm." + to_string(b.norm), x);
      }
      if (b.act != ActKind::none) {
        x = activate(x, b.act);
        r.taps.emplace_back(p + "act." + to_string(b.act), x);
      }
    };
    if (b.seq == BlockOrder::post) {
      conv();
      norm_act();
    } else {
      norm_act();
      conv();
    }
    if (b.sc) {
      const Tensor3 branch = upsample_with(block_in, UpsampleMode::bilinear(), b.pad);
      if (branch.channels() == x.channels())
        add_into(x, branch);
      else
        add_into(x, channel_broadcast(branch.channel_mean(), x.channels()));
      r.taps.emplace_back(p + "sc", x);
    }
  }
  r.output = x;
  return r;
}

SimResult forward_sim(const ArchSpec& spec, const Tensor3& input, Rng& rng) {
  return forward_sim(ArchModel::instantiate(spec, rng), input);
}

Matrix averaged_transfer_magnitude(const ConvKernel& kernel, std::size_t rows, std::size_t cols) {
  Matrix acc(rows, cols);
  for (std::size_t o = 0; o < kernel.out_channels(); ++o)
    for (std::size_t i = 0; i < kernel.in_channels(); ++i) {
      const Matrix m = magnitude(kernel_transfer(kernel.slice_matrix(o, i), rows, cols));
      for (std::size_t j = 0; j < acc.size(); ++j) acc.values()[j] += m.values()[j];
    }
  const double inv = 1.0 / static_cast<double>(kernel.out_channels() * kernel.in_channels());
  for (double& v : acc.values()) v *= inv;
  return acc;
}

Matrix predict_spectrum(const ArchModel& model, const Matrix& input_mean_spectrum) {
  const ArchSpec& spec = model.spec;
  if (input_mean_spectrum.rows() != spec.height || input_mean_spectrum.cols() != spec.width)
    throw DataError("input spectrum does not match the architecture's input size");
  Matrix s = input_mean_spectrum;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const BlockSpec& b = spec.blocks[i];
    const std::size_t rows = 2 * s.rows(), cols = 2 * s.cols();
    const Matrix bilinear = magnitude(kernel_transfer(bilinear_kernel(), rows, cols));
    const Matrix branch = b.sc ? repeat_times(s, bilinear) : Matrix();
    const Matrix up = b.u == UpsampleKind::deconv ? averaged_transfer_magnitude(*model.deconv[i], rows, cols)
                      : b.u == UpsampleKind::bilinear ? bilinear
                                                      : magnitude(kernel_transfer(nearest_kernel(), rows, cols));
    s = repeat_times(s, up);
    const Matrix conv = averaged_transfer_magnitude(model.conv[i], rows, cols);
    if (b.seq == BlockOrder::post) {
      multiply_into(s, conv);
      if (b.norm != NormKind::none) normalize_spectrum(s);
    } else {
      if (b.norm != NormKind::none) normalize_spectrum(s);
      multiply_into(s, conv);
    }
    if (b.sc)
      for (std::size_t j = 0; j < s.size(); ++j) s.values()[j] += branch.values()[j];
  }
  return s;
}

}  // namespace specprint
