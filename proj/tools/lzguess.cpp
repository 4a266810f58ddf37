#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lzguess.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lzguess;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

// ---------------------------------------------------------------------------
// Result tables. Cells hold JSON scalars; null prints as NA in CSV.

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_cell(const json& v) {
  if (v.is_null()) return "NA";
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : " ") + csv_cell(e);
    return s;
  }
  return v.dump();
}

struct Table {
  std::vector<std::string> columns;
  std::vector<json> rows;  // objects keyed by column

  void add(json row) { rows.push_back(std::move(row)); }

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < columns.size(); ++i) {
        out += (i ? "," : "") + csv_cell(r.contains(columns[i]) ? r[columns[i]] : json(nullptr));
      }
      out += '\n';
    }
    return out;
  }

  std::string as_json() const {
    json arr = json::array();
    for (const auto& r : rows) {
      json o;
      for (const auto& c : columns) o[c] = r.contains(c) ? r[c] : json(nullptr);
      arr.push_back(std::move(o));
    }
    return arr.dump(2) + "\n";
  }
};

// A handler returns either a table (CSV by default) or one object (JSON by default).
struct Output {
  std::optional<Table> table;
  json object;

  std::string render(const std::string& format) const {
    if (table) return format == "json" ? table->as_json() : table->csv();
    if (format == "csv") {
      Table t;
      for (const auto& [k, v] : object.items()) {
        if (!v.is_object()) t.columns.push_back(k);
      }
      t.add(object);
      return t.csv();
    }
    return object.dump(2) + "\n";
  }

  std::string default_format() const { return table ? "csv" : "json"; }
};

// ---------------------------------------------------------------------------
// Options shared by the subcommands; each subcommand registers what it uses.

struct Options {
  std::string input, corpus, target, alphabet, mode = "text";
  std::string y_input, y_corpus, y_target, y_alphabet;
  std::string machine, bits_file, emit;
  std::size_t n = 0;
  std::vector<double> zetas;
  std::vector<double> s_values;
  std::vector<std::size_t> ells;
  std::string guesser = "lz";
  std::size_t rounds = 0;
  std::uint64_t cap = kDefaultCap;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string out_dir;
  std::string format;
  std::optional<double> q, log2q;
  bool no_persist = false;
};

// Reads files once and remembers their digests for the manifest.
struct Inputs {
  std::map<std::string, std::string> digests;

  std::string read(const std::string& path) {
    std::string bytes = read_file(path);
    digests[path] = sha256_hex(bytes);
    return bytes;
  }
};

IngestMode parse_mode(const std::string& m) {
  if (m == "text") return IngestMode::text;
  if (m == "bytes") return IngestMode::bytes;
  if (m == "line" || m == "symbol_per_line") return IngestMode::symbol_per_line;
  throw PreconditionError("unknown ingest mode '" + m + "' (text, bytes, line)");
}

struct Loaded {
  SymbolSeq seq;
  std::string id;
};

// One sequence from exactly one of --target, --input, --corpus.
Loaded load_sequence(const std::string& target, const std::string& input, const std::string& corpus,
                     const std::string& alphabet, const std::string& mode, std::size_t n, Inputs& in,
                     AlphabetPtr fallback = nullptr, const char* role = "sequence") {
  const int given = !target.empty() + !input.empty() + !corpus.empty();
  if (given != 1) {
    throw PreconditionError(std::string("give exactly one ") + role + " source (--target, --input or --corpus)");
  }
  AlphabetPtr alpha = alphabet.empty() ? fallback : std::make_shared<const Alphabet>(parse_alphabet_spec(alphabet));
  Loaded out{SymbolSeq(std::make_shared<const Alphabet>(Alphabet::binary()), {}), ""};
  if (!corpus.empty()) {
    if (n == 0) throw PreconditionError("--corpus needs --n");
    auto kind = parse_corpus_kind(corpus);
    if (auto* f = std::get_if<FileCorpus>(&kind)) {
      f->mode = parse_mode(mode);
      in.read(f->path);
    }
    if (!alpha) alpha = std::make_shared<const Alphabet>(parse_alphabet_spec("ab"));
    out.seq = generate_corpus(kind, n, alpha);
    out.id = corpus;
  } else {
    const std::string text = input.empty() ? target : in.read(input);
    out.seq = ingest(text, alpha, input.empty() ? IngestMode::text : parse_mode(mode));
    out.id = input.empty() ? "target" : fs::path(input).filename().string();
    if (n != 0) {
      if (out.seq.size() < n) {
        throw PreconditionError("input has " + std::to_string(out.seq.size()) + " symbols, --n asks for " +
                                std::to_string(n));
      }
      out.seq = out.seq.slice(0, n);
    }
  }
  if (out.seq.empty()) throw PreconditionError(std::string(role) + " is empty");
  return out;
}

Loaded load_x(const Options& o, Inputs& in, AlphabetPtr fallback = nullptr) {
  return load_sequence(o.target, o.input, o.corpus, o.alphabet, o.mode, o.n, in, std::move(fallback));
}

Loaded load_y(const Options& o, Inputs& in) {
  return load_sequence(o.y_target, o.y_input, o.y_corpus, o.y_alphabet, o.mode, o.n, in, nullptr, "side-information");
}

struct Machine {
  std::shared_ptr<const FSGMSpec> spec;
  AlphabetPtr alphabet;
};

Machine load_machine(const Options& o, Inputs& in) {
  if (o.machine.empty()) throw PreconditionError("--machine is required");
  Machine m;
  std::vector<std::string> warnings;
  m.spec = std::make_shared<const FSGMSpec>(parse_fsgm_text(in.read(o.machine), &m.alphabet, &warnings));
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return m;
}

std::string symbols_text(std::span<const Symbol> s, const Alphabet& a) {
  std::string out;
  for (Symbol x : s) out += a.token(x);
  return out;
}

std::vector<double> zetas_or_default(const Options& o) { return o.zetas.empty() ? std::vector<double>{1.0} : o.zetas; }

std::vector<double> s_or_default(const Options& o) {
  return o.s_values.empty() ? std::vector<double>{2.0} : o.s_values;
}

// Guard for enumerations done in the CLI itself.
void require_enumerable(double size, const std::string& what) {
  if (size > static_cast<double>(kMaxEnumeratedOutputs)) {
    throw BudgetError(what + " would enumerate about " + std::to_string(static_cast<long double>(size)) +
                      " sequences; the exact-mode limit is " + std::to_string(kMaxEnumeratedOutputs));
  }
}

// ---------------------------------------------------------------------------
// Report rows shared by guess and sandwich.

const std::vector<std::string> kReportColumns{
    "id",       "n",      "alpha",     "guesser",          "zeta",           "s",      "ell",
    "q_log2",   "moment_log2", "exponent", "converse_entropy", "converse_clogc", "direct", "rounds",
    "mc_mean",  "mc_stderr",   "mc_ci",    "censored",         "ordering"};

json report_row(const Loaded& x, const Guesser& g) {
  json r;
  r["id"] = x.id;
  r["n"] = x.seq.size();
  r["alpha"] = x.seq.alpha();
  r["guesser"] = g.name();
  r["ell"] = g.kind() == Guesser::Kind::lz_block ? json(g.ell()) : json(nullptr);
  return r;
}

void put_moment(json& r, const MomentEstimate& e) {
  r["zeta"] = e.zeta;
  r["q_log2"] = num(e.q_log2);
  r["moment_log2"] = num(e.exact.log2_value);
  r["exponent"] = num(e.exponent);
  r["rounds"] = e.rounds;
  if (e.rounds) {
    r["mc_mean"] = num(e.mc_mean);
    r["mc_stderr"] = num(e.mc_stderr);
    r["mc_ci"] = num(e.mc_ci);
    r["censored"] = e.censored;
  }
}

Guesser make_guesser(const Options& o, std::size_t alpha, const Machine* m) {
  if (o.guesser == "lz") return Guesser::lz_full(alpha);
  if (o.guesser == "uniform") return Guesser::uniform(alpha);
  if (o.guesser == "lz_block") {
    if (o.ells.size() != 1) throw PreconditionError("--guesser lz_block needs exactly one --ell");
    return Guesser::lz_block(alpha, o.ells[0]);
  }
  if (o.guesser == "fsgm") {
    if (!m) throw PreconditionError("--guesser fsgm needs --machine");
    return Guesser::fsgm(m->spec);
  }
  throw PreconditionError("unknown guesser '" + o.guesser + "' (lz, lz_block, uniform, fsgm)");
}

// ---------------------------------------------------------------------------
// Subcommand handlers.

Output cmd_parse(const Options& o, Inputs& in) {
  auto x = load_x(o, in);
  auto p = incremental_parse(x.seq);
  json j;
  j["id"] = x.id;
  j["n"] = x.seq.size();
  j["alpha"] = x.seq.alpha();
  j["c_lz"] = p.c_lz();
  j["last_complete"] = p.last_complete;
  j["code_bits"] = p.code_bits;
  json phrases = json::array();
  for (const auto& ph : p.phrases) phrases.push_back(symbols_text(x.seq.symbols().subspan(ph.offset, ph.length), x.seq.alphabet()));
  j["phrases"] = phrases;
  return {std::nullopt, j};
}

Output cmd_codelen(const Options& o, Inputs& in) {
  auto x = load_x(o, in);
  const auto n = x.seq.size();
  auto p = incremental_parse(x.seq);
  json j;
  j["id"] = x.id;
  j["n"] = n;
  j["alpha"] = x.seq.alpha();
  j["c_lz"] = p.c_lz();
  j["code_bits"] = p.code_bits;
  j["bits_per_symbol"] = num(static_cast<double>(p.code_bits) / static_cast<double>(n));
  j["epsilon_lz"] = n >= 2 ? num(epsilon_lz(n, x.seq.alpha())) : json(nullptr);
  if (!o.emit.empty()) {
    const auto packed = pack_bits(encode(x.seq));
    std::ofstream f(o.emit, std::ios::binary);
    if (!f) throw Error("cannot write '" + o.emit + "'");
    f.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    j["emitted"] = o.emit;
  }
  return {std::nullopt, j};
}

Output cmd_decode(const Options& o, Inputs& in) {
  if (o.bits_file.empty()) throw PreconditionError("--bits is required");
  if (o.alphabet.empty()) throw PreconditionError("--alphabet is required");
  if (o.n == 0) throw PreconditionError("--n is required");
  const std::string raw = in.read(o.bits_file);
  const std::vector<std::uint8_t> packed(raw.begin(), raw.end());
  auto alpha = std::make_shared<const Alphabet>(parse_alphabet_spec(o.alphabet));
  auto seq = decode(unpack_bits(packed), o.n, alpha);
  json j;
  j["n"] = seq.size();
  j["sequence"] = render(seq);
  return {std::nullopt, j};
}

Output cmd_fsgm_run(const Options& o, Inputs& in) {
  auto m = load_machine(o, in);
  if (o.n == 0) throw PreconditionError("--n is required");
  BitSource bits(o.seed, 0);
  auto tr = run(*m.spec, bits, o.n);
  json j;
  j["machine"] = fs::path(o.machine).filename().string();
  j["n"] = o.n;
  j["seed"] = o.seed;
  j["output"] = symbols_text(tr.output, *m.alphabet);
  j["bits_consumed"] = tr.bits_consumed();
  json states = json::array();
  for (auto z : tr.states) states.push_back(m.spec->name(z));
  j["states"] = states;
  return {std::nullopt, j};
}

Output cmd_fsgm_dist(const Options& o, Inputs& in) {
  auto m = load_machine(o, in);
  Table t;
  t.columns = {"sequence", "log2prob", "prob"};
  auto add = [&](std::span<const Symbol> x, const DyadicProb& p) {
    json r;
    r["sequence"] = symbols_text(x, *m.alphabet);
    r["log2prob"] = num(p.log2());
    r["prob"] = p.str();
    t.add(r);
  };
  if (!o.target.empty() || !o.input.empty()) {
    auto x = load_x(o, in, m.alphabet);
    add(x.seq.symbols(), sequence_prob(*m.spec, x.seq));
  } else {
    if (o.n == 0) throw PreconditionError("--n is required");
    require_enumerable(std::pow(static_cast<double>(m.spec->alpha()), static_cast<double>(o.n)),
                       "output distribution of length " + std::to_string(o.n));
    for (const auto& [x, p] : output_distribution(*m.spec, o.n)) add(x, p);
  }
  return {t, {}};
}

Output cmd_guess(const Options& o, Inputs& in) {
  std::optional<Machine> m;
  if (o.guesser == "fsgm") m = load_machine(o, in);
  auto x = load_x(o, in, m ? m->alphabet : nullptr);
  const auto g = make_guesser(o, x.seq.alpha(), m ? &*m : nullptr);
  Table t;
  t.columns = kReportColumns;
  for (const auto& e : run_game(g, x.seq, zetas_or_default(o), o.rounds, o.seed, o.cap, o.jobs)) {
    json r = report_row(x, g);
    put_moment(r, e);
    t.add(r);
  }
  return {t, {}};
}

Output cmd_moments(const Options& o, Inputs&) {
  if (o.q.has_value() == o.log2q.has_value()) throw PreconditionError("give exactly one of --q, --log2q");
  const double lq = o.q ? std::log2(*o.q) : *o.log2q;
  if (o.rounds && lq < -40) throw BudgetError("Monte Carlo needs q >= 2^-40; drop --rounds for exact values only");
  Table t;
  t.columns = {"q_log2", "zeta", "moment_log2", "method", "rel_error", "lower_bound_log2",
               "rounds", "mc_mean", "mc_stderr", "mc_ci", "censored"};
  std::optional<GuessSamples> samples;
  if (o.rounds) samples = simulate_geometric(std::exp2(lq), o.rounds, o.seed, o.cap, o.jobs);
  for (double z : zetas_or_default(o)) {
    auto e = exact_moment(lq, z, 1);
    json r;
    r["q_log2"] = num(lq);
    r["zeta"] = z;
    r["moment_log2"] = num(e.exact.log2_value);
    r["method"] = method_name(e.exact.method);
    r["rel_error"] = num(e.exact.rel_error);
    r["lower_bound_log2"] = lq <= -1 ? num(moment_lower_bound_log2(lq, z)) : json(nullptr);
    r["rounds"] = o.rounds;
    if (samples) {
      attach_samples(e, *samples);
      r["mc_mean"] = num(e.mc_mean);
      r["mc_stderr"] = num(e.mc_stderr);
      r["mc_ci"] = num(e.mc_ci);
      r["censored"] = e.censored;
    }
    t.add(r);
  }
  return {t, {}};
}

Output cmd_bounds(const Options& o, Inputs& in) {
  auto x = load_x(o, in);
  const auto n = x.seq.size();
  Table t;
  t.columns = {"id", "n", "alpha", "zeta", "s", "ell", "h_ell", "converse_entropy", "converse_clogc",
               "rho_lower", "rho_upper", "c_lz", "epsilon_lz", "delta_n", "delta_ell", "eps_clamped"};
  for (double z : zetas_or_default(o)) {
    for (double s : s_or_default(o)) {
      auto rep = sandwich(x.seq, z, s, Guesser::lz_full(x.seq.alpha()), x.id);
      const auto d = delta_n(n, s, z, x.seq.alpha());
      for (const auto& row : rep.rows) {
        if (!o.ells.empty() && std::find(o.ells.begin(), o.ells.end(), row.ell) == o.ells.end()) continue;
        json r;
        r["id"] = x.id;
        r["n"] = n;
        r["alpha"] = x.seq.alpha();
        r["zeta"] = z;
        r["s"] = s;
        r["ell"] = row.ell;
        r["h_ell"] = num(row.h_ell);
        r["converse_entropy"] = num(row.converse_entropy);
        r["converse_clogc"] = num(row.converse_clogc);
        r["rho_lower"] = num(row.rho_lower);
        r["rho_upper"] = num(row.rho_upper);
        r["c_lz"] = rep.c_lz;
        r["epsilon_lz"] = num(epsilon_lz(n, x.seq.alpha()));
        r["delta_n"] = num(d.value);
        r["delta_ell"] = d.ell;
        r["eps_clamped"] = rep.eps_clamped;
        t.add(r);
      }
    }
  }
  return {t, {}};
}

Output cmd_sandwich(const Options& o, Inputs& in) {
  std::optional<Machine> m;
  if (o.guesser == "fsgm") m = load_machine(o, in);
  auto x = load_x(o, in, m ? m->alphabet : nullptr);
  const auto g = make_guesser(o, x.seq.alpha(), m ? &*m : nullptr);
  Table t;
  t.columns = kReportColumns;
  std::vector<MomentEstimate> mc;
  if (o.rounds) mc = run_game(g, x.seq, zetas_or_default(o), o.rounds, o.seed, o.cap, o.jobs);
  std::size_t zi = 0;
  for (double z : zetas_or_default(o)) {
    for (double s : s_or_default(o)) {
      auto rep = sandwich(x.seq, z, s, g, x.id);
      json r = report_row(x, g);
      if (o.rounds) put_moment(r, mc[zi]);
      r["zeta"] = z;
      r["s"] = s;
      r["q_log2"] = num(rep.q_log2);
      r["moment_log2"] = num(moment_exact_log2q(rep.q_log2, z).log2_value);
      r["exponent"] = num(rep.measured);
      r["converse_entropy"] = num(rep.converse_entropy);
      r["converse_clogc"] = num(rep.converse_clogc);
      r["direct"] = rep.direct ? num(*rep.direct) : json(nullptr);
      std::string ord = "ok";
      if (!rep.ok()) {
        ord.clear();
        for (const auto& v : rep.violations) ord += (ord.empty() ? "" : "; ") + v;
      }
      r["ordering"] = ord;
      t.add(r);
    }
    ++zi;
  }
  return {t, {}};
}

Output cmd_corpus(const Options& o, Inputs& in) {
  if (o.corpus.empty()) throw PreconditionError("--corpus is required");
  auto x = load_x(o, in);
  json j;
  j["kind"] = o.corpus;
  j["n"] = x.seq.size();
  j["alpha"] = x.seq.alpha();
  j["sequence"] = render(x.seq);
  return {std::nullopt, j};
}

// --- side information -------------------------------------------------------

struct PairLoaded {
  Loaded x, y;
};

PairLoaded load_pair(const Options& o, Inputs& in) {
  PairLoaded p{load_x(o, in), load_y(o, in)};
  if (p.x.seq.size() != p.y.seq.size()) {
    throw PreconditionError("x has " + std::to_string(p.x.seq.size()) + " symbols but y has " +
                            std::to_string(p.y.seq.size()));
  }
  return p;
}

json pair_header(const PairLoaded& p) {
  json j;
  j["id"] = p.x.id;
  j["y_source"] = p.y.id;
  j["n"] = p.x.seq.size();
  j["alpha"] = p.x.seq.alpha();
  j["beta"] = p.y.seq.alpha();
  return j;
}

Output cmd_joint_parse(const Options& o, Inputs& in) {
  auto p = load_pair(o, in);
  auto jp = joint_parse(p.x.seq.symbols(), p.y.seq.symbols(), p.x.seq.alpha(), p.y.seq.alpha());
  json j = pair_header(p);
  j["c_xy"] = jp.c_xy();
  j["c_y"] = jp.c_y();
  j["u"] = num(jp.u);
  json yp = json::array();
  for (const auto& e : jp.y_phrases) {
    json r;
    r["y_phrase"] = symbols_text(e.y_phrase, p.y.seq.alphabet());
    r["count"] = e.count;
    yp.push_back(r);
  }
  j["y_phrases"] = yp;
  return {std::nullopt, j};
}

Output cmd_cond_complexity(const Options& o, Inputs& in) {
  auto p = load_pair(o, in);
  const auto xs = p.x.seq.symbols();
  const auto ys = p.y.seq.symbols();
  const auto a = p.x.seq.alpha(), b = p.y.seq.alpha();
  const auto n = xs.size();
  auto jp = joint_parse(xs, ys, a, b);
  const auto bits = cond_code_length(xs, ys, a, b);
  json j = pair_header(p);
  j["c_xy"] = jp.c_xy();
  j["u"] = num(jp.u);
  j["u_per_symbol"] = num(jp.u / static_cast<double>(n));
  j["code_bits"] = bits;
  j["code_bits_per_symbol"] = num(static_cast<double>(bits) / static_cast<double>(n));
  j["epsilon_1"] = n >= 2 ? num(epsilon_1(n)) : json(nullptr);
  return {std::nullopt, j};
}

Output cmd_cond_guess(const Options& o, Inputs& in) {
  auto p = load_pair(o, in);
  const auto xs = p.x.seq.symbols();
  const auto ys = p.y.seq.symbols();
  const auto a = p.x.seq.alpha(), b = p.y.seq.alpha();
  if (o.ells.size() > 1) throw PreconditionError("cond-guess takes at most one --ell");
  const std::size_t ell = o.ells.empty() ? 0 : o.ells[0];
  const double lq = ell ? cond_block_guess_log2prob(xs, ys, a, b, ell) : cond_guess_log2prob(xs, ys, a, b);
  std::optional<GuessSamples> samples;
  if (o.rounds) {
    samples = play_rounds(o.rounds, o.seed, o.cap, o.jobs,
                          [&](BitSource& bits) { return cond_attempt(xs, ys, a, b, ell, bits); });
  }
  Table t;
  t.columns = {"id", "y_source", "n", "alpha", "beta", "zeta", "ell", "q_log2", "moment_log2", "exponent",
               "rounds", "mc_mean", "mc_stderr", "mc_ci", "censored"};
  for (double z : zetas_or_default(o)) {
    auto e = exact_moment(lq, z, xs.size());
    if (samples) attach_samples(e, *samples);
    json r = pair_header(p);
    r["ell"] = ell ? json(ell) : json(nullptr);
    put_moment(r, e);
    t.add(r);
  }
  return {t, {}};
}

Output cmd_cond_bounds(const Options& o, Inputs& in) {
  auto p = load_pair(o, in);
  const auto ells = o.ells.empty() ? std::vector<std::size_t>{1} : o.ells;
  Table t;
  t.columns = {"id", "y_source", "n", "alpha", "beta", "zeta", "s", "ell", "c_xy", "u", "code_bits", "h_cond",
               "q_log2", "exponent", "converse_entropy", "converse_u", "direct", "truncated", "ordering"};
  for (double z : zetas_or_default(o)) {
    for (double s : s_or_default(o)) {
      for (std::size_t ell : ells) {
        auto r = cond_bounds(p.x.seq.symbols(), p.y.seq.symbols(), p.x.seq.alpha(), p.y.seq.alpha(), s, ell, z);
        json row = pair_header(p);
        row["zeta"] = z;
        row["s"] = s;
        row["ell"] = ell;
        row["c_xy"] = r.c_xy;
        row["u"] = num(r.u);
        row["code_bits"] = r.code_bits;
        row["h_cond"] = num(r.h_cond);
        row["q_log2"] = num(r.q_log2);
        row["exponent"] = num(r.measured);
        row["converse_entropy"] = num(r.converse_entropy);
        row["converse_u"] = num(r.converse_u);
        row["direct"] = num(r.direct);
        row["truncated"] = r.truncated;
        std::string ord = "ok";
        if (!r.ok()) {
          ord.clear();
          for (const auto& v : r.violations) ord += (ord.empty() ? "" : "; ") + v;
        }
        row["ordering"] = ord;
        t.add(row);
      }
    }
  }
  return {t, {}};
}

// ---------------------------------------------------------------------------
// Persistence.

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string run_id(const std::string& sub, const std::vector<std::string>& args,
                   const std::map<std::string, std::string>& digests) {
  std::string key = sub;
  for (const auto& a : args) key += '\0' + a;
  for (const auto& [p, d] : digests) key += '\0' + p + '=' + d;
  return sha256_hex(key).substr(0, 16);
}

std::string default_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LZGUESS_OUT_DIR"); env && *env) return env;
  return ".";
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << bytes;
}

struct Executed {
  std::string subcommand;
  std::string format;
  std::string body;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> digests;
  std::string out_dir;
  bool persist = true;
};

fs::path persist(const Executed& ex, const std::vector<std::string>& args) {
  const std::string id = run_id(ex.subcommand, args, ex.digests);
  const fs::path dir = fs::path(ex.out_dir) / "runs" / id;
  fs::create_directories(dir);
  json m;
  m["run_id"] = id;
  m["timestamp"] = utc_now();
  m["subcommand"] = ex.subcommand;
  m["args"] = args;
  m["seed"] = ex.seed;
  m["input_digests"] = ex.digests;
  m["format"] = ex.format;
  m["version"] = kVersion;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  write_file(dir / ("results." + ex.format), ex.body);
  return dir;
}

// ---------------------------------------------------------------------------
// Argument handling. `args` excludes the program name.

void add_sequence_flags(CLI::App* c, Options& o) {
  c->add_option("--input", o.input, "Sequence file");
  c->add_option("--corpus", o.corpus, "periodic:<pattern>, bernoulli:<p>[:seed], thue_morse, file:<path>");
  c->add_option("--target", o.target, "Sequence given literally");
  c->add_option("--alphabet", o.alphabet, "Alphabet tokens, e.g. ab or 0,1; inferred when omitted");
  c->add_option("--mode", o.mode, "Ingest mode: text, bytes, line")->capture_default_str();
  c->add_option("--n", o.n, "Length (corpus length, or prefix of the input)");
}

void add_run_flags(CLI::App* c, Options& o) {
  c->add_option("--out-dir", o.out_dir, "Directory receiving runs/<id>/ (default $LZGUESS_OUT_DIR or .)");
  c->add_option("--format", o.format, "Output format: csv or json")->check(CLI::IsMember({"csv", "json"}));
  c->add_flag("--no-persist", o.no_persist, "Print results without writing a run directory");
}

void add_mc_flags(CLI::App* c, Options& o) {
  c->add_option("--rounds", o.rounds, "Monte Carlo rounds (0: exact only)")->capture_default_str();
  c->add_option("--cap", o.cap, "Guess cap per round; longer rounds are censored")->capture_default_str();
  c->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  c->add_option("--jobs", o.jobs, "Worker threads for Monte Carlo")->capture_default_str()->check(CLI::PositiveNumber);
}

// Thrown after CLI11 has printed help or a usage message.
struct ExitRequest {
  int code;
};

using Handler = Output (*)(const Options&, Inputs&);

Executed execute(const std::vector<std::string>& args) {
  Options o;
  CLI::App app{"Lempel-Ziv guessing: parsing, guessing machines, moments and bounds", "lzguess"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::map<CLI::App*, std::pair<std::string, Handler>> handlers;

  auto sub = [&](const std::string& name, const std::string& help, Handler h) {
    auto* c = app.add_subcommand(name, help);
    handlers[c] = {name, h};
    add_run_flags(c, o);
    return c;
  };

  auto* c = sub("parse", "Incremental parse of a sequence", cmd_parse);
  add_sequence_flags(c, o);
  c = sub("codelen", "LZ code length; --emit writes the packed code", cmd_codelen);
  add_sequence_flags(c, o);
  c->add_option("--emit", o.emit, "Write the packed code to this file");
  c = sub("decode", "Decode a packed LZ code", cmd_decode);
  c->add_option("--bits", o.bits_file, "Packed code file")->required();
  c->add_option("--alphabet", o.alphabet, "Alphabet tokens")->required();
  c->add_option("--n", o.n, "Sequence length")->required();
  c = sub("fsgm-run", "Run a guessing machine on random bits", cmd_fsgm_run);
  c->add_option("--machine", o.machine, "Machine file")->required();
  c->add_option("--n", o.n, "Number of outputs")->required();
  c->add_option("--seed", o.seed, "Bit-source seed")->capture_default_str();
  c = sub("fsgm-dist", "Exact output distribution of a machine", cmd_fsgm_dist);
  c->add_option("--machine", o.machine, "Machine file")->required();
  c->add_option("--n", o.n, "Output length");
  c->add_option("--target", o.target, "Only this sequence");
  c->add_option("--input", o.input, "Only the sequence in this file");
  c->add_option("--mode", o.mode, "Ingest mode for --input")->capture_default_str();
  c = sub("guess", "Guessing game: exact moments and Monte Carlo", cmd_guess);
  add_sequence_flags(c, o);
  add_mc_flags(c, o);
  c->add_option("--guesser", o.guesser, "lz, lz_block, uniform, fsgm")->capture_default_str();
  c->add_option("--ell", o.ells, "Block length for lz_block");
  c->add_option("--machine", o.machine, "Machine file for --guesser fsgm");
  c->add_option("--zeta", o.zetas, "Moment order (repeatable)");
  c = sub("moments", "Moments of a geometric guess count", cmd_moments);
  c->add_option("--q", o.q, "Success probability");
  c->add_option("--log2q", o.log2q, "log2 of the success probability");
  c->add_option("--zeta", o.zetas, "Moment order (repeatable)");
  add_mc_flags(c, o);
  c = sub("bounds", "Per-block-length converse terms", cmd_bounds);
  add_sequence_flags(c, o);
  c->add_option("--zeta", o.zetas, "Moment order (repeatable)");
  c->add_option("--s", o.s_values, "State count (repeatable)");
  c->add_option("--ell", o.ells, "Restrict to these block lengths");
  c = sub("sandwich", "Converse, measured and direct exponents", cmd_sandwich);
  add_sequence_flags(c, o);
  add_mc_flags(c, o);
  c->add_option("--zeta", o.zetas, "Moment order (repeatable)");
  c->add_option("--s", o.s_values, "State count (repeatable)");
  c->add_option("--guesser", o.guesser, "lz, lz_block, uniform, fsgm")->capture_default_str();
  c->add_option("--ell", o.ells, "Block length for lz_block");
  c->add_option("--machine", o.machine, "Machine file for --guesser fsgm");
  c = sub("corpus", "Generate a test corpus", cmd_corpus);
  c->add_option("--corpus", o.corpus, "Corpus kind")->required();
  c->add_option("--n", o.n, "Length")->required();
  c->add_option("--alphabet", o.alphabet, "Alphabet tokens (default ab)");

  auto* side = app.add_subcommand("sideinfo", "Guessing with side information");
  side->require_subcommand(1);
  auto side_sub = [&](const std::string& name, const std::string& help, Handler h) {
    auto* s = side->add_subcommand(name, help);
    handlers[s] = {"sideinfo " + name, h};
    add_run_flags(s, o);
    add_sequence_flags(s, o);
    s->add_option("--y-input", o.y_input, "Side-information file");
    s->add_option("--y-corpus", o.y_corpus, "Side-information corpus kind");
    s->add_option("--y-target", o.y_target, "Side information given literally");
    s->add_option("--y-alphabet", o.y_alphabet, "Side-information alphabet");
    return s;
  };
  side_sub("joint-parse", "Joint incremental parse of (x, y)", cmd_joint_parse);
  side_sub("cond-complexity", "Conditional complexity and code length", cmd_cond_complexity);
  c = side_sub("cond-guess", "Conditional guessing game", cmd_cond_guess);
  add_mc_flags(c, o);
  c->add_option("--zeta", o.zetas, "Moment order (repeatable)");
  c->add_option("--ell", o.ells, "Restart the dictionary every ell symbols");
  c = side_sub("cond-bounds", "Conditional converse, measured and direct exponents", cmd_cond_bounds);
  c->add_option("--zeta", o.zetas, "Moment order (repeatable)");
  c->add_option("--s", o.s_values, "State count (repeatable)");
  c->add_option("--ell", o.ells, "Block length (repeatable)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    throw ExitRequest{app.exit(e)};
  }

  for (const auto& [cmd, entry] : handlers) {
    if (!cmd->parsed()) continue;
    Inputs in;
    Output out = entry.second(o, in);
    Executed ex;
    ex.subcommand = entry.first;
    ex.format = o.format.empty() ? out.default_format() : o.format;
    ex.body = out.render(ex.format);
    ex.seed = o.seed;
    ex.digests = std::move(in.digests);
    ex.out_dir = default_out_dir(o.out_dir);
    ex.persist = !o.no_persist;
    return ex;
  }
  throw PreconditionError("no subcommand given");
}

// Re-runs a recorded invocation and compares its results byte for byte.
int replay(const std::vector<std::string>& args) {
  std::string manifest_path, out_dir;
  std::optional<std::uint64_t> seed;
  CLI::App app{"Replay a recorded run", "lzguess replay"};
  app.add_option("--manifest", manifest_path, "manifest.json of the run")->required();
  app.add_option("--seed", seed, "Override the master seed");
  app.add_option("--out-dir", out_dir, "Where a run with an overridden seed is written");
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    throw ExitRequest{app.exit(e)};
  }

  const json m = json::parse(read_file(manifest_path));
  for (const auto& [path, digest] : m.at("input_digests").items()) {
    if (!fs::exists(path)) throw Error("digest error: input '" + path + "' is missing");
    if (sha256_hex(read_file(path)) != digest.get<std::string>()) {
      throw Error("digest error: input '" + path + "' does not match the manifest");
    }
  }
  auto run_args = m.at("args").get<std::vector<std::string>>();
  if (seed) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < run_args.size(); ++i) {
      if (run_args[i] == "--seed") {
        ++i;
        continue;
      }
      if (run_args[i].rfind("--seed=", 0) == 0) continue;
      kept.push_back(run_args[i]);
    }
    kept.push_back("--seed");
    kept.push_back(std::to_string(*seed));
    run_args = std::move(kept);
  }
  Executed ex = execute(run_args);
  const fs::path original = fs::path(manifest_path).parent_path() / ("results." + m.at("format").get<std::string>());
  const bool identical = fs::exists(original) && read_file(original.string()) == ex.body;

  json r;
  r["replayed"] = m.at("run_id");
  r["identical"] = identical;
  if (seed) {
    ex.out_dir = default_out_dir(out_dir);
    r["new_run"] = persist(ex, run_args).string();
  }
  std::cout << r.dump(2) << "\n";
  if (!identical && !seed) {
    std::cerr << "error: replay produced different results\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (!args.empty() && args[0] == "replay") return replay({args.begin() + 1, args.end()});
    Executed ex = execute(args);
    std::cout << ex.body;
    if (ex.persist) {
      const auto dir = persist(ex, args);
      std::cerr << "run: " << dir.string() << "\n";
    }
    return 0;
  } catch (const ExitRequest& e) {
    return e.code == 0 ? 0 : 2;  // help/version, or a usage error already printed
  } catch (const BudgetError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 4;
  } catch (const DecodeError& e) {
    std::cerr << "decode error: " << e.what() << "\n";
    return 5;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
