// One process per criterion: `spot_acceptance --criterion N` prints
// "PASS criterion N: ..." or "FAIL criterion N: ..." and exits 0 or 1.
// Without arguments every criterion runs in turn.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "spot/boundary.hpp"
#include "spot/corpus.hpp"
#include "spot/discovery.hpp"
#include "spot/metrics.hpp"
#include "spot/nn/layers.hpp"
#include "spot/nn/ops.hpp"
#include "spot/pipeline.hpp"
#include "spot/rng.hpp"
#include "spot/smote.hpp"
#include "spot/text.hpp"
#include "spot/typeid.hpp"
#include "spot/valueex.hpp"
#include "synthetic.hpp"

using namespace spot;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects sub-checks; the criterion passes only if all of them do.
struct Outcome {
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& what) {
    ok = ok && cond;
    notes.push_back(std::string(cond ? "  ok   " : "  FAIL ") + what);
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

nn::Tensor random_leaf(nn::Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(nn::element_count(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return nn::Tensor::parameter(std::move(shape), std::move(v));
}

nn::Tensor random_const(nn::Shape shape, Rng& rng) {
  std::vector<double> v(nn::element_count(shape));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return nn::Tensor::from(std::move(shape), std::move(v));
}

nn::Tensor probe(const nn::Tensor& out, const nn::Tensor& w) { return nn::sum(nn::mul(out, w)); }

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  Outcome o;
  const auto s = prf1_from_counts(184, 487, 121, 0);
  o.check(std::abs(s.f1 - 0.377) <= 0.001, "F1 from 184/487/121 = " + fmt("%.4f", s.f1) + " (0.377 +- 0.001)");
  o.notes.push_back("  info precision " + fmt("%.4f", s.precision) + ", recall " + fmt("%.4f", s.recall) +
                    " (published P/R differ; see README)");
  return o;
}

// Batch whose every distance stays at least `margin` away from its radius so
// the |.| kink is outside the finite-difference stencil.
struct BoundaryBatch {
  nn::Tensor z, centroids, raw;
  std::vector<std::size_t> labels;
};

BoundaryBatch boundary_batch(Rng& rng, double margin) {
  const std::size_t d = 1 + rng.index(8), n = 1 + rng.index(16), k = 1 + rng.index(5);
  BoundaryBatch b;
  b.centroids = random_leaf({k, d}, rng, 2.0);
  b.raw = random_leaf({k}, rng, 1.5);
  const auto radii = [&] {
    std::vector<double> r;
    for (double x : b.raw.values()) r.push_back(std::log1p(std::exp(x)));
    return r;
  }();
  std::vector<double> zv;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = rng.index(k);
    b.labels.push_back(y);
    while (true) {
      std::vector<double> p(d);
      double dist2 = 0;
      for (std::size_t j = 0; j < d; ++j) {
        p[j] = b.centroids.at(y, j) + rng.uniform(-3, 3);
        dist2 += (p[j] - b.centroids.at(y, j)) * (p[j] - b.centroids.at(y, j));
      }
      if (std::abs(std::sqrt(dist2) - radii[y]) > margin) {
        zv.insert(zv.end(), p.begin(), p.end());
        break;
      }
    }
  }
  b.z = nn::Tensor::parameter({n, d}, std::move(zv));
  return b;
}

Outcome criterion_2() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0, worst_abs = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto b = boundary_batch(rng, 0.05);
    auto loss = [&] { return boundary_loss(b.z, b.labels, b.centroids, b.raw); };
    for (const auto* leaf : {&b.z, &b.centroids, &b.raw}) {
      const auto r = test::check_gradient(loss, *leaf);
      worst = std::max(worst, r.max_relative);
      worst_abs = std::max(worst_abs, r.max_absolute);
    }
  }
  const double secs = seconds_since(t0);
  o.check(worst < 1e-4, "max relative error over z, centroids, raw radii on 20 batches = " + fmt("%.3g", worst) +
                              ", max absolute gap " + fmt("%.3g", worst_abs));
  o.check(secs < 10.0, "runtime " + fmt("%.2f", secs) + " s < 10 s");
  return o;
}

Outcome criterion_3() {
  Outcome o;
  Rng rng(77);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto b = boundary_batch(rng, 0.0);
    const double got = boundary_loss(b.z, b.labels, b.centroids, b.raw).item();
    double expect = 0;
    const std::size_t n = b.labels.size(), d = b.centroids.cols();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t y = b.labels[i];
      double dist2 = 0;
      for (std::size_t j = 0; j < d; ++j) dist2 += std::pow(b.z.at(i, j) - b.centroids.at(y, j), 2);
      expect += std::abs(std::sqrt(dist2) - std::log1p(std::exp(b.raw.at(y))));
    }
    expect /= static_cast<double>(n);
    worst = std::max(worst, std::abs(got - expect));
  }
  o.check(worst < 1e-12, "max |L_b - mean|dist - delta|| over 50 batches = " + fmt("%.3g", worst));
  return o;
}

Outcome criterion_4() {
  Outcome o;
  double worst_residual = 0;
  bool knn_ok = true, counts_ok = true, originals_ok = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::size_t minority = 3 + rng.index(6), majority = minority + 2 + rng.index(20), dim = 1 + rng.index(6);
    const std::size_t k = 1 + rng.index(minority - 1);
    const double ratio = seed % 4 == 0 ? 0.6 : 1.0;
    std::vector<FeaturePoint> pts;
    for (std::size_t i = 0; i < minority + majority; ++i) {
      FeaturePoint p;
      p.label = i % 3 == 0 && std::count_if(pts.begin(), pts.end(), [](auto& q) { return q.label == 1; }) <
                                   static_cast<long>(minority)
                    ? 1
                    : 0;
      for (std::size_t j = 0; j < dim; ++j) p.vector.push_back(rng.uniform(-5, 5));
      pts.push_back(std::move(p));
    }
    // top up whichever class fell short of its intended size
    std::size_t m = std::count_if(pts.begin(), pts.end(), [](auto& q) { return q.label == 1; });
    for (auto& p : pts)
      if (m < minority && p.label == 0) {
        p.label = 1;
        ++m;
      }
    const std::size_t n_min = m, n_maj = pts.size() - m;
    const auto r = smote_upsample(pts, k, ratio, rng);

    for (std::size_t i = 0; i < pts.size(); ++i)
      originals_ok = originals_ok && r.points[i].vector == pts[i].vector && r.points[i].label == pts[i].label;
    const auto target = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_maj)));
    const std::size_t expected_new = target > n_min ? target - n_min : 0;
    counts_ok = counts_ok && r.origins.size() == expected_new && r.points.size() == pts.size() + expected_new;

    std::vector<std::size_t> minority_idx;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (pts[i].label == 1) minority_idx.push_back(i);
    for (std::size_t s = 0; s < r.origins.size(); ++s) {
      const auto& org = r.origins[s];
      const auto& a = pts[org.parent].vector;
      const auto& b = pts[org.neighbor].vector;
      const auto& x = r.points[r.original_count + s].vector;
      knn_ok = knn_ok && r.points[r.original_count + s].label == 1 && pts[org.parent].label == 1;
      // residual of x against the segment: project, clamp, measure
      double num = 0, den = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        num += (x[j] - a[j]) * (b[j] - a[j]);
        den += (b[j] - a[j]) * (b[j] - a[j]);
      }
      const double t = den > 0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
      double res2 = 0;
      for (std::size_t j = 0; j < dim; ++j) res2 += std::pow(x[j] - (a[j] + t * (b[j] - a[j])), 2);
      worst_residual = std::max(worst_residual, std::sqrt(res2));
      // brute-force neighbour set: the k minority points closest to the
      // parent (itself excluded), ties broken by index
      std::vector<std::pair<double, std::size_t>> cand;
      for (std::size_t i : minority_idx) {
        if (i == org.parent) continue;
        double d2 = 0;
        for (std::size_t j = 0; j < dim; ++j) d2 += std::pow(pts[i].vector[j] - a[j], 2);
        cand.emplace_back(d2, i);
      }
      std::sort(cand.begin(), cand.end());
      bool found = false;
      for (std::size_t c = 0; c < k; ++c) found = found || cand[c].second == org.neighbor;
      knn_ok = knn_ok && found;
    }
  }
  o.check(worst_residual < 1e-9, "max segment residual over 20 draws = " + fmt("%.3g", worst_residual));
  o.check(knn_ok, "every neighbour is among the parent's k nearest minority points");
  o.check(counts_ok, "synthetic counts equal floor(ratio * majority) - minority");
  o.check(originals_ok, "original points preserved in order");
  return o;
}

const Corpus& fixture() {
  static const Corpus c = load_corpus(test::fixture_corpus_path());
  return c;
}

// Deterministic stand-in for a trained generator.
class FirstWordsValue final : public ValueStage {
 public:
  std::string name() const override { return "first-words"; }
  std::string generate(const TypedInstance& inst, const Dialogue&, PersonaType) const override {
    const auto toks = tokenize(inst.target.text);
    std::string out;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, toks.size()); ++i) out += (i ? " " : "") + toks[i];
    return out;
  }
};

Outcome criterion_5() {
  Outcome o;
  GoldDiscoveryStage gd;
  GoldTypeStage gt;
  GoldValueStage gv;
  FirstWordsValue fw;
  for (const ValueStage* v : {static_cast<const ValueStage*>(&gv), static_cast<const ValueStage*>(&fw)}) {
    const Stages stages{&gd, &gt, v};
    for (auto split : {Split::Train, Split::Test}) {
      EvalOptions opts;
      opts.split = split;
      const auto a = results_to_json(run_standalone(fixture(), stages, opts).results);
      const auto b = results_to_json(run_pipeline(fixture(), stages, opts).results);
      o.check(a == b, "gold stages 1-2, value stage '" + v->name() + "', split " + std::string(to_string(split)) +
                          ": pipeline results byte-equal to standalone (" + std::to_string(a.size()) + " bytes)");
    }
  }
  return o;
}

Outcome criterion_6() {
  Outcome o;
  {
    const auto t0 = Clock::now();
    const auto corpus = test::separable_discovery_corpus(20, 31);
    nn::EncoderConfig enc;
    enc.embed_dim = 16;
    enc.hidden_dim = 16;
    enc.max_sequence_length = 16;
    enc.seed = 4;
    DiscoveryTrainConfig t;
    t.epochs = 200;
    t.smote_k = 3;
    t.seed = 8;
    const auto r = train_discovery(corpus, enc, t);
    std::vector<bool> pred, gold;
    for (const auto& d : corpus.split(Split::Train)) {
      const auto p = predict_discovery(r.model, d).positive;
      pred.insert(pred.end(), p.begin(), p.end());
      for (const auto& u : d.utterances) gold.push_back(u.has_persona);
    }
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) (pred[i] ? (gold[i] ? tp : fp) : (gold[i] ? fn : tn))++;
    const double f1 = prf1_from_counts(tp, fp, fn, tn).f1;
    const double secs = seconds_since(t0);
    o.check(f1 == 1.0, "discovery train F1 after 200 epochs on 20 separable dialogues = " + fmt("%.4f", f1));
    o.check(secs < 120.0, "discovery overfit runtime " + fmt("%.1f", secs) + " s < 120 s");
  }
  {
    const auto dialogues = test::separable_type_dialogues(8, 12);
    const auto instances = test::persona_instances(dialogues);
    nn::EncoderConfig enc;
    enc.embed_dim = 16;
    enc.hidden_dim = 8;
    enc.max_sequence_length = 16;
    enc.seed = 21;
    TypeIdTrainConfig t;
    t.epochs = 60;
    t.seed = 9;
    const auto context = ContextEncoder::trainable();
    const auto r = train_typeid(instances, enc, {}, context, t);
    const auto& bm = *r.model.boundaries();
    const auto radii = bm.radii();
    std::size_t correct = 0, inside = 0;
    for (const auto& inst : instances) {
      const auto z = typeid_representation(r.model, context, inst);
      const std::size_t y = index_of(*inst.gold_type);
      correct += predict_type(z.values(), bm) == *inst.gold_type;
      double d2 = 0;
      for (std::size_t j = 0; j < z.size(); ++j) d2 += std::pow(z.at(j) - bm.centroids.at(y, j), 2);
      inside += std::sqrt(d2) <= radii[y];
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(instances.size());
    const double cover = static_cast<double>(inside) / static_cast<double>(instances.size());
    o.check(acc == 1.0, "typeid train accuracy on 5 separable classes = " + fmt("%.4f", acc));
    o.check(cover >= 0.95, "typeid points inside their class boundary = " + fmt("%.4f", cover) + " (>= 0.95)");
  }
  {
    const auto dialogues = test::copy_task_dialogues();
    const auto instances = test::persona_instances(dialogues);
    const auto index = index_dialogues(dialogues);
    nn::EncoderConfig enc;
    enc.embed_dim = 24;
    enc.hidden_dim = 48;
    enc.max_sequence_length = 24;
    enc.seed = 5;
    ValueExOptions opts;
    opts.max_length = 6;
    ValueExTrainConfig t;
    t.epochs = 150;
    t.batch_size = 5;
    t.learning_rate = 5e-3;
    t.seed = 6;
    const auto r = train_valueex(instances, index, build_valueex_vocabulary(dialogues), enc, opts, t);
    std::size_t exact = 0;
    for (const auto& inst : instances)
      exact += generate_value(r.model, inst, lookup_dialogue(index, inst.dialogue_id)) == *inst.gold_value;
    o.check(exact == instances.size(), "valueex copy task exact match " + std::to_string(exact) + "/" +
                                           std::to_string(instances.size()));
  }
  return o;
}

Outcome criterion_7() {
  Outcome o;
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"the cat sat on the mat", "the cat is on the mat"},
      {"i teach aerobics", "teaches aerobics"},
      {"my sister jill", "sister jill"},
      {"loves loves loves pizza", "loves pizza"},
      {"a b c d e f", "f e d c b a"},
      {"new york city", "new york"},
      {"the the the", "the"},
      {"x", "x y z w"},
      {"hates spiders a lot", "hates big hairy spiders"},
      {"works nights at the hospital", "works at the hospital at nights"},
      {"plays violin and piano", "plays the violin"},
      {"completely unrelated words", "nothing shared here"},
  };
  double worst_r = 0, worst_b = 0;
  for (const auto& [c, r] : pairs) {
    const auto s = score_generation(c, r);
    worst_r = std::max({worst_r, std::abs(s.rouge1 - oracle::rouge_n(c, r, 1)),
                        std::abs(s.rouge2 - oracle::rouge_n(c, r, 2))});
    worst_b = std::max({worst_b, std::abs(s.bleu1 - oracle::bleu(c, r, 1)), std::abs(s.bleu2 - oracle::bleu(c, r, 2)),
                        std::abs(s.bleu3 - oracle::bleu(c, r, 3))});
  }
  o.check(worst_r < 1e-6, "ROUGE-1/2 vs brute force on " + std::to_string(pairs.size()) +
                              " pairs: max |delta| = " + fmt("%.3g", worst_r));
  o.check(worst_b < 1e-6, "BLEU-1/2/3 vs brute force on " + std::to_string(pairs.size()) +
                              " pairs: max |delta| = " + fmt("%.3g", worst_b));

  double worst_f = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Rng rng(seed);
    const std::size_t n = 5 + rng.index(40);
    const std::vector<std::string> labels = {"trait", "likes", "relation", "occupation", "misc"};
    std::vector<std::optional<std::size_t>> preds;
    std::vector<std::size_t> golds;
    std::vector<int> pi, gi;
    for (std::size_t i = 0; i < n; ++i) {
      golds.push_back(rng.index(5));
      preds.emplace_back(rng.uniform() < 0.6 ? golds.back() : rng.index(5));
      gi.push_back(static_cast<int>(golds.back()));
      pi.push_back(static_cast<int>(*preds.back()));
    }
    const double got = multiclass_scores(preds, golds, labels).weighted_f1;
    worst_f = std::max(worst_f, std::abs(got - oracle::weighted_f1(pi, gi, 5)));
  }
  o.check(worst_f < 1e-6, "weighted F1 vs brute force on 12 draws: max |delta| = " + fmt("%.3g", worst_f));

  double worst_a = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto set = test::random_annotations(8 + seed, 2 + seed % 3, 2 + seed % 4, 0.15, seed);
    worst_a = std::max(worst_a, std::abs(krippendorff_alpha(set) - oracle::krippendorff_alpha(set)));
  }
  o.check(worst_a < 1e-6, "alpha vs brute force on 12 draws: max |delta| = " + fmt("%.3g", worst_a));

  AnnotationSet four;
  const std::vector<std::string> a = {"y", "y", "n", "n"}, b = {"y", "n", "n", "n"};
  for (std::size_t i = 0; i < 4; ++i) {
    four.item_ids.push_back(std::to_string(i));
    four.labels["A"].emplace_back(a[i]);
    four.labels["B"].emplace_back(b[i]);
  }
  const double alpha = krippendorff_alpha(four);
  o.check(std::abs(alpha - 8.0 / 15.0) < 1e-9, "4-item alpha fixture = " + fmt("%.12f", alpha) + " (8/15)");
  return o;
}

Outcome criterion_8() {
  Outcome o;
  std::ifstream in(fs::path(SPOT_TEST_DATA_DIR) / "fixture_stats.json");
  const auto expected = nlohmann::json::parse(in);
  const auto stats = corpus_stats(fixture());
  for (auto s : kAllSplits) {
    const auto& e = expected.at(std::string(to_string(s)));
    const auto& st = stats.of(s);
    bool same = st.present && st.dialogues == e.at("dialogues").get<std::size_t>() &&
                st.utterances == e.at("utterances").get<std::size_t>() &&
                st.persona_utterances == e.at("persona").get<std::size_t>() &&
                st.mean_speakers_per_dialogue ==
                    e.at("speakers_total").get<double>() / e.at("dialogues").get<double>();
    for (auto t : kAllPersonaTypes)
      same = same && st.type_counts[index_of(t)] == e.at("types").at(std::string(to_string(t))).get<std::size_t>();
    o.check(same, "fixture " + std::string(to_string(s)) + " split matches embedded counts");
  }
  // The CLI prints the same numbers.
  std::ostringstream out, err;
  const int code = cli::run_command({"stats", "--corpus", test::fixture_corpus_path().string()}, out, err);
  o.check(code == 0 && out.str() == render_stats(stats), "`spot stats` output agrees");

  const char* full = std::getenv("SPICE_CORPUS");
  if (!full || !*full) {
    o.notes.push_back("  info SPICE_CORPUS not set; full-corpus table not checked");
    return o;
  }
  const auto spice = corpus_stats(load_corpus(full));
  const auto& tr = spice.of(Split::Train);
  const auto& te = spice.of(Split::Test);
  o.check(tr.dialogues == 1039 && tr.utterances == 9989 && tr.persona_utterances == 1005,
          "SPICE train " + std::to_string(tr.dialogues) + "/" + std::to_string(tr.utterances) + "/" +
              std::to_string(tr.persona_utterances) + " (1039/9989/1005)");
  o.check(te.dialogues == 280 && te.utterances == 1983 && te.persona_utterances == 305,
          "SPICE test " + std::to_string(te.dialogues) + "/" + std::to_string(te.utterances) + "/" +
              std::to_string(te.persona_utterances) + " (280/1983/305)");
  const std::array<std::size_t, 5> types = {389, 244, 107, 89, 179};
  o.check(tr.type_counts == types, "SPICE train type counts 389/244/107/89/179");
  return o;
}

Outcome criterion_9() {
  Outcome o;
  const auto run = [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_command(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
  };
  const auto flags = [](const fs::path& dir) {
    return std::vector<std::string>{
        "--corpus", test::fixture_corpus_path().string(), "--seed", "17", "--output", dir.string(),
        "--set", "discovery.epochs=3", "--set", "discovery.embed_dim=8", "--set", "discovery.hidden_dim=8",
        "--set", "discovery.smote_k=2", "--set", "typeid.epochs=3", "--set", "typeid.embed_dim=8",
        "--set", "typeid.hidden_dim=4", "--set", "typeid.boundary_epochs=30", "--set", "valueex.epochs=3",
        "--set", "valueex.embed_dim=8", "--set", "valueex.hidden_dim=16", "--set", "valueex.max_length=4"};
  };
  std::array<fs::path, 2> dirs = {test::scratch_dir("accept-det-a"), test::scratch_dir("accept-det-b")};
  bool ran = true;
  for (const auto& dir : dirs) {
    for (std::string cmd : {"train-discovery", "train-typeid", "train-valueex"}) {
      auto args = flags(dir);
      args.insert(args.begin(), cmd);
      ran = ran && run(args) == 0;
    }
    for (std::string mode : {"standalone", "pipeline"}) {
      auto args = flags(dir);
      args.insert(args.begin(), {"evaluate", "--mode", mode});
      ran = ran && run(args) == 0;
    }
  }
  o.check(ran, "train-discovery, train-typeid, train-valueex and both evaluate modes exit 0 twice");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0]))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dirs[0]));
  std::sort(files.begin(), files.end());
  std::size_t same = 0;
  for (const auto& f : files) {
    const bool eq = fs::exists(dirs[1] / f) && test::read_file(dirs[0] / f) == test::read_file(dirs[1] / f);
    same += eq;
    if (!eq) o.notes.push_back("  diff " + f.string());
  }
  o.check(!files.empty() && same == files.size(),
          std::to_string(same) + "/" + std::to_string(files.size()) + " output files byte-identical");
  const bool has_ckpt = std::any_of(files.begin(), files.end(), [](auto& f) { return f.extension() == ".ckpt"; });
  const bool has_report =
      std::any_of(files.begin(), files.end(), [](auto& f) { return f.filename() == "report-pipeline.json"; });
  o.check(has_ckpt && has_report, "compared set includes checkpoints and reports");
  return o;
}

Outcome criterion_10() {
  Outcome o;
  const auto run = [&](const std::string& what, const std::function<nn::Tensor()>& loss,
                       const std::vector<std::pair<std::string, nn::Tensor>>& leaves) {
    double worst = 0, worst_abs = 0;
    for (const auto& [name, leaf] : leaves) {
      const auto r = test::check_gradient(loss, leaf);
      worst = std::max(worst, r.max_relative);
      worst_abs = std::max(worst_abs, r.max_absolute);
    }
    o.check(worst < 1e-4, what + " (" + std::to_string(leaves.size()) + " tensors): max relative error " +
                              fmt("%.3g", worst) + ", max absolute gap " + fmt("%.3g", worst_abs));
  };
  auto with_params = [](std::vector<std::pair<std::string, nn::Tensor>> leaves, const nn::ParameterStore& store) {
    for (const auto& [name, p] : store.all()) leaves.emplace_back(name, p);
    return leaves;
  };
  {
    Rng rng(101);
    nn::ParameterStore store;
    nn::AdditiveAttention attn(store, "attn", 4, 4, 5, rng);
    auto q = random_leaf({4}, rng);
    auto k = random_leaf({3, 4}, rng);
    auto v = random_leaf({3, 2}, rng);
    const auto w = random_const({2}, rng);
    run("additive attention", [&] { return probe(attn(q, k, v).context, w); },
        with_params({{"q", q}, {"k", k}, {"v", v}}, store));
  }
  {
    Rng rng(102);
    nn::ParameterStore store;
    nn::BiGru gru(store, "gru", 3, 4, rng);
    auto x = random_leaf({4, 3}, rng);
    const auto w = random_const({4, 8}, rng);
    const auto ws = random_const({8}, rng);
    run("BiGRU", [&] {
          const auto out = gru(x);
          return nn::add(probe(out.states, w), probe(out.summary, ws));
        },
        with_params({{"x", x}}, store));
  }
  {
    Rng rng(103);
    nn::ParameterStore store;
    nn::TransformerEncoderLayer layer(store, "enc", 8, 2, 16, rng);
    auto x = random_leaf({3, 8}, rng);
    const auto w = random_const({3, 8}, rng);
    run("transformer encoder layer", [&] { return probe(layer(x), w); }, with_params({{"x", x}}, store));
  }
  {
    Rng rng(104);
    nn::ParameterStore store;
    nn::TransformerDecoderLayer layer(store, "dec", 8, 2, 16, rng);
    auto x = random_leaf({3, 8}, rng);
    auto mem = random_leaf({4, 8}, rng);
    const auto w = random_const({3, 8}, rng);
    run("transformer decoder layer", [&] { return probe(layer(x, mem), w); },
        with_params({{"x", x}, {"memory", mem}}, store));
  }
  {
    Rng rng(105);
    nn::ParameterStore store;
    nn::Linear head(store, "head", 6, 5, rng);
    auto h = random_leaf({4, 6}, rng);
    const std::vector<std::size_t> labels = {0, 3, 4, 1};
    run("linear + cross-entropy head", [&] { return nn::cross_entropy(head(h), labels); },
        with_params({{"h", h}}, store));
    Rng rng2(106);
    nn::ParameterStore store2;
    nn::Linear bin(store2, "bin", 6, 2, rng2);
    auto h2 = random_leaf({5, 6}, rng2);
    const std::vector<std::size_t> y2 = {0, 1, 1, 0, 1};
    run("binary cross-entropy head", [&] { return nn::cross_entropy(bin(h2), y2); },
        with_params({{"h", h2}}, store2));
  }
  return o;
}

const std::array<std::pair<const char*, Outcome (*)()>, 10> kCriteria = {{
    {"metric arithmetic on published counts", criterion_1},
    {"boundary-loss gradients match finite differences", criterion_2},
    {"boundary-loss closed form", criterion_3},
    {"SMOTE geometry and class balance", criterion_4},
    {"oracle pipeline equals standalone", criterion_5},
    {"overfit smoke tests", criterion_6},
    {"metric oracles", criterion_7},
    {"corpus statistics", criterion_8},
    {"determinism of train and evaluate", criterion_9},
    {"neural-core gradient checks", criterion_10},
}};

bool run_one(int n) {
  const auto& [title, fn] = kCriteria[static_cast<std::size_t>(n - 1)];
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << n << ": " << title << '\n';
  for (const auto& line : o.notes) std::cout << line << '\n';
  std::cout.flush();
  return o.ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      const int n = std::atoi(argv[++i]);
      if (n < 1 || n > 10) {
        std::cerr << "criterion must be 1..10\n";
        return 2;
      }
      which.push_back(n);
    } else {
      std::cerr << "usage: spot_acceptance [--criterion N]...\n";
      return 2;
    }
  }
  if (which.empty()) {
    which.resize(10);
    std::iota(which.begin(), which.end(), 1);
  }
  bool all = true;
  for (int n : which) all = run_one(n) && all;
  return all ? 0 : 1;
}
