#include "tailorsum/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tailorsum {
namespace {

constexpr std::string_view kMagic = "tailorsum-checkpoint";
constexpr int kVersion = 1;

void append_hex(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  if (ec != std::errc()) throw std::runtime_error("cannot format value");
  out.append(buf, end);
}

void append_values(std::string& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    append_hex(out, values[i]);
    out += (i % 8 == 7 || i + 1 == values.size()) ? '\n' : ' ';
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  bool done() {
    skip_space();
    return pos_ >= text_.size();
  }

  std::string_view word() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of checkpoint");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view w) {
    const auto got = word();
    if (got != w) fail("expected '" + std::string(w) + "', found '" + std::string(got) + "'");
  }

  std::size_t count() {
    const auto w = word();
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad count '" + std::string(w) + "'");
    return v;
  }

  double hex() {
    auto w = word();
    bool negative = false;
    if (!w.empty() && w.front() == '-') {
      negative = true;
      w.remove_prefix(1);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v, std::chars_format::hex);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad value '" + std::string(w) + "'");
    return negative ? -v : v;
  }

  [[noreturn]] void fail(const std::string& message) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw std::runtime_error("checkpoint line " + std::to_string(line) + ": " + message);
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParams& params, const AdagradState* optimizer) {
  params.validate();
  std::string out;
  out += std::string(kMagic) + ' ' + std::to_string(kVersion) + '\n';
  const auto& d = params.dims;
  out += "dims " + std::to_string(d.vocab) + ' ' + std::to_string(d.embed) + ' ' +
         std::to_string(d.hidden) + ' ' + std::to_string(d.attention) + '\n';
  params.for_each_block([&](std::string_view name, std::span<const double> values) {
    out += "block " + std::string(name) + ' ' + std::to_string(values.size()) + '\n';
    append_values(out, values);
  });
  if (optimizer != nullptr) {
    if (optimizer->accumulators.size() != params.parameter_count()) {
      throw std::invalid_argument("optimizer state does not match parameter count");
    }
    out += "adagrad ";
    append_hex(out, optimizer->learning_rate);
    out += ' ';
    append_hex(out, optimizer->initial_accumulator);
    out += ' ' + std::to_string(optimizer->accumulators.size()) + '\n';
    append_values(out, optimizer->accumulators);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view text) {
  Reader in(text);
  in.expect(kMagic);
  if (in.count() != static_cast<std::size_t>(kVersion)) in.fail("unsupported checkpoint version");
  in.expect("dims");
  ModelDims dims;
  dims.vocab = in.count();
  dims.embed = in.count();
  dims.hidden = in.count();
  dims.attention = in.count();
  Checkpoint ck{ModelParams::zeros(dims), std::nullopt};
  ck.params.for_each_block([&](std::string_view name, std::span<double> values) {
    in.expect("block");
    in.expect(name);
    if (in.count() != values.size()) in.fail("block " + std::string(name) + " has the wrong size");
    for (double& v : values) v = in.hex();
  });
  if (!in.done()) {
    in.expect("adagrad");
    AdagradState opt;
    opt.learning_rate = in.hex();
    opt.initial_accumulator = in.hex();
    const std::size_t n = in.count();
    if (n != ck.params.parameter_count()) in.fail("adagrad state has the wrong size");
    opt.accumulators.resize(n);
    for (double& v : opt.accumulators) v = in.hex();
    ck.optimizer = std::move(opt);
    if (!in.done()) in.fail("trailing content");
  }
  try {
    ck.params.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const AdagradState* optimizer) {
  const std::string text = serialize_checkpoint(params, optimizer);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace tailorsum
