// Copyright 2026 The Pitmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pitmix/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace pitmix::corpus {

namespace {

constexpr char kSampleMagic[8] = {'P', 'I', 'T', 'M', 'I', 'X', '1', '\0'};

// Shared per-label band layout; every speaker warps these.
void unit_bands(std::uint64_t corpus_seed, int label, double* lo, double* hi) {
  Rng r(child_seed(corpus_seed, fnv1a64("unit-bands"), std::uint64_t(label)));
  *lo = r.uniform(400.0, 2000.0);
  *hi = r.uniform(2100.0, 3600.0);
}

void write_feature_block(std::ostream& os, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) write_f32(os, float(m(r, c)));
}

Matrix read_feature_block(std::istream& is, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = double(read_f32(is));
  return m;
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  throw Error("unknown split");
}

SpeakerProfile make_speaker(int speaker_id, int num_labels,
                            std::uint64_t corpus_seed) {
  PITMIX_CHECK(speaker_id >= 0, "speaker id must be nonnegative");
  PITMIX_CHECK(num_labels >= 2, "need at least silence plus one unit label");
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  p.gender_tag = (speaker_id >> 1) & 1;
  p.f0_hz = 85.0 + 50.0 * p.gender_tag + 2.0 * speaker_id;

  Rng rs(child_seed(corpus_seed, fnv1a64("speaker"),
                    std::uint64_t(speaker_id)));
  double warp = rs.uniform(0.94, 1.06);
  double tilt = rs.uniform(-0.3, 0.3);

  p.unit_signatures.resize(std::size_t(num_labels));
  p.unit_signatures[0].noise_amp = 1e-5;  // silence renders near-silence
  for (int u = 1; u < num_labels; ++u) {
    double lo = 0.0, hi = 0.0;
    unit_bands(corpus_seed, u, &lo, &hi);
    UnitSignature& sig = p.unit_signatures[std::size_t(u)];
    sig.partial_hz = {p.f0_hz, lo * warp, hi * warp};
    sig.partial_amp = {0.05, 0.10 * (1.0 + 0.5 * tilt),
                       0.08 * (1.0 - 0.5 * tilt)};
    sig.partial_phase = {rs.uniform(0.0, 2.0 * std::numbers::pi),
                         rs.uniform(0.0, 2.0 * std::numbers::pi),
                         rs.uniform(0.0, 2.0 * std::numbers::pi)};
    sig.noise_amp = 0.003;
  }
  return p;
}

Utterance synth_utterance(const SpeakerProfile& profile,
                          const std::vector<ScriptEntry>& script,
                          std::uint64_t rng_seed,
                          const dsp::FeatureConfig& cfg) {
  PITMIX_CHECK(!script.empty(), "empty script");
  const int num_labels = int(profile.unit_signatures.size());
  Index frames = 0;
  for (const ScriptEntry& e : script) {
    PITMIX_CHECK(e.frames >= 1, "script durations must be >= 1 frame");
    PITMIX_CHECK(e.label >= 0 && e.label < num_labels,
                 "script label outside the label set");
    frames += e.frames;
  }

  Utterance utt;
  utt.speaker_id = profile.speaker_id;
  utt.labels.reserve(std::size_t(frames));
  for (const ScriptEntry& e : script)
    utt.labels.insert(utt.labels.end(), std::size_t(e.frames), e.label);

  const Index win = cfg.frame_len_samples();
  const Index hop = cfg.hop_samples();
  const Index len = win + (frames - 1) * hop;
  utt.waveform.sample_rate = cfg.sample_rate;
  utt.waveform.samples = Vector::Zero(len);

  Rng noise(rng_seed);
  const double two_pi_over_sr = 2.0 * std::numbers::pi / cfg.sample_rate;
  for (Index n = 0; n < len; ++n) {
    Index t = std::min<Index>(n / hop, frames - 1);
    const UnitSignature& sig =
        profile.unit_signatures[std::size_t(utt.labels[std::size_t(t)])];
    double x = 0.0;
    for (std::size_t k = 0; k < sig.partial_hz.size(); ++k)
      x += sig.partial_amp[k] *
           std::sin(two_pi_over_sr * sig.partial_hz[k] * double(n) +
                    sig.partial_phase[k]);
    x += sig.noise_amp * noise.uniform(-1.0, 1.0);
    utt.waveform.samples[n] = x;
  }
  return utt;
}

std::vector<int> pad_labels(const std::vector<int>& labels, Index frames) {
  PITMIX_CHECK(Index(labels.size()) <= frames,
               "cannot pad labels to fewer frames");
  Index deficit = frames - Index(labels.size());
  Index front = (deficit + 1) / 2;
  std::vector<int> out(std::size_t(frames), kSilenceLabel);
  std::copy(labels.begin(), labels.end(), out.begin() + front);
  return out;
}

MixtureSample make_mixture(const std::vector<Utterance>& sources,
                           const std::vector<double>& interferer_snr_db,
                           std::uint64_t rng_seed, const dsp::StftPlan& plan,
                           int num_labels) {
  const std::size_t S = sources.size();
  PITMIX_CHECK(S >= 2, "a mixture needs at least two sources");
  PITMIX_CHECK(interferer_snr_db.size() == S - 1,
               "one SNR per interferer required");
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t b = a + 1; b < S; ++b)
      PITMIX_CHECK(sources[a].speaker_id != sources[b].speaker_id,
                   "mixture sources must come from distinct speakers");

  Index max_frames = 0, min_frames = Index(sources[0].labels.size());
  Index max_len = 0;
  for (const Utterance& u : sources) {
    PITMIX_CHECK(!u.labels.empty(), "source with no frames");
    max_frames = std::max(max_frames, Index(u.labels.size()));
    min_frames = std::min(min_frames, Index(u.labels.size()));
    max_len = std::max(max_len, u.waveform.size());
  }
  PITMIX_CHECK(2 * min_frames >= max_frames,
               "overlap constraint: shortest source must cover at least half "
               "the longest");

  const dsp::FeatureConfig& cfg = plan.config();
  std::vector<dsp::Waveform> padded;
  padded.reserve(S);
  for (std::size_t s = 0; s < S; ++s)
    padded.push_back(dsp::pad_to_length(
        sources[s].waveform, max_len, cfg.pad_noise_amplitude,
        child_seed(rng_seed, fnv1a64("pad"), std::uint64_t(s))));

  std::vector<dsp::Waveform> interferers(padded.begin() + 1, padded.end());
  auto [mixed, itf_gains] =
      dsp::mix_at_snr(padded[0], interferers, interferer_snr_db);

  MixtureSample sample;
  sample.num_labels = num_labels;
  sample.snr_db = interferer_snr_db[0];
  sample.mixed_features = dsp::cmvn(plan.logfbank(mixed));
  sample.gains.push_back(1.0);
  sample.gains.insert(sample.gains.end(), itf_gains.begin(), itf_gains.end());

  const Index frames = sample.mixed_features.num_frames();
  for (std::size_t s = 0; s < S; ++s) {
    dsp::Waveform scaled = padded[s];
    scaled.samples *= sample.gains[s];
    sample.source_features.push_back(plan.logfbank(scaled));
    PITMIX_CHECK(sample.source_features.back().num_frames() == frames,
                 "padded source frame count diverged from the mixture");
    for (int l : sources[s].labels)
      PITMIX_CHECK(l >= 0 && l < num_labels, "label outside the label set");
    sample.source_labels.push_back(pad_labels(sources[s].labels, frames));
    sample.speaker_ids.push_back(sources[s].speaker_id);
  }
  return sample;
}

MixtureSample single_sample(const Utterance& source, const dsp::StftPlan& plan,
                            int num_labels) {
  PITMIX_CHECK(!source.labels.empty(), "source with no frames");
  for (int l : source.labels)
    PITMIX_CHECK(l >= 0 && l < num_labels, "label outside the label set");
  MixtureSample sample;
  sample.num_labels = num_labels;
  sample.snr_db = 0.0;
  sample.source_features.push_back(plan.logfbank(source.waveform));
  sample.mixed_features = dsp::cmvn(sample.source_features[0]);
  PITMIX_CHECK(Index(source.labels.size()) ==
                   sample.mixed_features.num_frames(),
               "label stream length must equal the frame count");
  sample.source_labels.push_back(source.labels);
  sample.speaker_ids.push_back(source.speaker_id);
  sample.gains.push_back(1.0);
  return sample;
}

void validate(const DatasetConfig& cfg) {
  PITMIX_CHECK(cfg.num_sources >= 1 && cfg.num_sources <= 6,
               "num_sources must be in [1, 6]");
  PITMIX_CHECK(cfg.num_speakers >= 2 * cfg.num_sources,
               "need at least 2*S speakers for a speaker-disjoint split");
  PITMIX_CHECK(cfg.num_mixtures >= 1 && cfg.num_valid_mixtures >= 1 &&
                   cfg.num_test_mixtures >= 1,
               "every split needs at least one sample");
  PITMIX_CHECK(!cfg.snr_grid_db.empty(), "empty SNR grid");
  PITMIX_CHECK(cfg.num_labels >= 2, "need silence plus at least one unit");
  PITMIX_CHECK(cfg.min_unit_frames >= 1 &&
                   cfg.max_unit_frames >= cfg.min_unit_frames,
               "bad unit duration bounds");
  PITMIX_CHECK(cfg.min_utt_frames >= 2 &&
                   cfg.max_utt_frames >= cfg.min_utt_frames,
               "bad utterance length bounds");
}

std::string serialize_config(const DatasetConfig& cfg) {
  std::ostringstream os;
  os << "num_speakers=" << cfg.num_speakers
     << ";num_mixtures=" << cfg.num_mixtures
     << ";num_valid_mixtures=" << cfg.num_valid_mixtures
     << ";num_test_mixtures=" << cfg.num_test_mixtures
     << ";num_sources=" << cfg.num_sources << ";snr_grid_db=";
  for (std::size_t i = 0; i < cfg.snr_grid_db.size(); ++i) {
    if (i) os << ",";
    os << format_double(cfg.snr_grid_db[i]);
  }
  os << ";num_labels=" << cfg.num_labels
     << ";min_utt_frames=" << cfg.min_utt_frames
     << ";max_utt_frames=" << cfg.max_utt_frames
     << ";min_unit_frames=" << cfg.min_unit_frames
     << ";max_unit_frames=" << cfg.max_unit_frames << ";seed=" << cfg.seed
     << ";frame_len=" << format_double(cfg.features.frame_len)
     << ";frame_hop=" << format_double(cfg.features.frame_hop)
     << ";n_fft=" << cfg.features.n_fft << ";n_mels=" << cfg.features.n_mels
     << ";floor=" << format_double(cfg.features.floor)
     << ";sample_rate=" << cfg.features.sample_rate << ";pad_noise_amplitude="
     << format_double(cfg.features.pad_noise_amplitude);
  return os.str();
}

std::string dataset_fingerprint(const DatasetConfig& cfg) {
  return hex16(fnv1a64(serialize_config(cfg)));
}

std::vector<int> speaker_pool(const DatasetConfig& cfg, Split split) {
  std::vector<int> pool;
  int want_parity = split == Split::kTest ? 1 : 0;
  for (int id = 0; id < cfg.num_speakers; ++id)
    if ((id & 1) == want_parity) pool.push_back(id);
  return pool;
}

void write_sample(std::ostream& os, const MixtureSample& sample) {
  const int S = sample.sources();
  const Index T = sample.frames();
  const Index D = sample.mixed_features.dim();
  PITMIX_CHECK(S >= 1 && Index(sample.source_labels.size()) == S &&
                   Index(sample.speaker_ids.size()) == S &&
                   Index(sample.gains.size()) == S,
               "inconsistent sample");
  os.write(kSampleMagic, sizeof(kSampleMagic));
  write_u32(os, std::uint32_t(S));
  write_u32(os, std::uint32_t(T));
  write_u32(os, std::uint32_t(D));
  write_u32(os, std::uint32_t(sample.num_labels));
  write_f32(os, float(sample.snr_db));
  for (int id : sample.speaker_ids) write_u32(os, std::uint32_t(id));
  for (double g : sample.gains) write_f32(os, float(g));
  write_feature_block(os, sample.mixed_features.frames);
  for (const auto& f : sample.source_features) {
    PITMIX_CHECK(f.num_frames() == T && f.dim() == D,
                 "source stream shape mismatch");
    write_feature_block(os, f.frames);
  }
  for (const auto& labels : sample.source_labels) {
    PITMIX_CHECK(Index(labels.size()) == T, "label stream length mismatch");
    for (int l : labels) write_u32(os, std::uint32_t(l));
  }
  PITMIX_CHECK(os.good(), "sample write failed");
}

MixtureSample read_sample(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  PITMIX_CHECK(is.good() && std::equal(magic, magic + 8, kSampleMagic),
               "bad sample magic");
  MixtureSample sample;
  const int S = int(read_u32(is));
  const Index T = Index(read_u32(is));
  const Index D = Index(read_u32(is));
  sample.num_labels = int(read_u32(is));
  sample.snr_db = double(read_f32(is));
  PITMIX_CHECK(S >= 1 && S <= 6 && T >= 1 && D >= 1, "corrupt sample header");
  for (int s = 0; s < S; ++s)
    sample.speaker_ids.push_back(int(read_u32(is)));
  for (int s = 0; s < S; ++s) sample.gains.push_back(double(read_f32(is)));
  sample.mixed_features.frames = read_feature_block(is, T, D);
  sample.mixed_features.normalized = true;
  for (int s = 0; s < S; ++s) {
    dsp::FeatureSequence f;
    f.frames = read_feature_block(is, T, D);
    sample.source_features.push_back(std::move(f));
  }
  for (int s = 0; s < S; ++s) {
    std::vector<int> labels(std::size_t(T), 0);
    for (auto& l : labels) {
      l = int(read_u32(is));
      PITMIX_CHECK(l >= 0 && l < sample.num_labels, "corrupt label");
    }
    sample.source_labels.push_back(std::move(labels));
  }
  PITMIX_CHECK(is.good(), "sample read failed");
  return sample;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::binary);  // binary keeps \n on every OS
  PITMIX_CHECK(os.good(), "cannot open manifest for writing: " + path);
  os << "fingerprint " << manifest.fingerprint << "\n";
  for (const ManifestRecord& r : manifest.records) {
    os << r.file << " " << r.offset << " " << r.num_sources << " " << r.frames
       << " " << format_double(r.snr_db);
    for (int id : r.speaker_ids) os << " " << id;
    os << "\n";
  }
  PITMIX_CHECK(os.good(), "manifest write failed");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  PITMIX_CHECK(is.good(), "cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  PITMIX_CHECK(bool(std::getline(is, line)), "empty manifest");
  {
    std::istringstream ls(line);
    std::string key;
    ls >> key >> m.fingerprint;
    PITMIX_CHECK(key == "fingerprint" && m.fingerprint.size() == 16,
                 "manifest must start with the config fingerprint");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestRecord r;
    std::string tok;
    ls >> r.file >> tok;
    r.offset = std::uint64_t(parse_long(tok));
    ls >> tok;
    r.num_sources = int(parse_long(tok));
    ls >> tok;
    r.frames = int(parse_long(tok));
    ls >> tok;
    r.snr_db = parse_double(tok);
    while (ls >> tok) r.speaker_ids.push_back(int(parse_long(tok)));
    PITMIX_CHECK(!r.file.empty() && r.num_sources >= 1 &&
                     int(r.speaker_ids.size()) == r.num_sources,
                 "malformed manifest line: " + line);
    m.records.push_back(std::move(r));
  }
  return m;
}

namespace {

MixtureSample generate_one(const DatasetConfig& cfg, Split split,
                           std::size_t index,
                           const std::vector<SpeakerProfile>& profiles,
                           const std::vector<int>& pool,
                           const dsp::StftPlan& plan) {
  const std::uint64_t c =
      child_seed(cfg.seed, fnv1a64(split_name(split)), std::uint64_t(index));
  Rng r(c);

  std::vector<int> speakers = pool;
  r.shuffle(speakers);
  speakers.resize(std::size_t(cfg.num_sources));

  const int target_frames =
      r.uniform_int(cfg.min_utt_frames, cfg.max_utt_frames);
  std::vector<Utterance> utts;
  for (int s = 0; s < cfg.num_sources; ++s) {
    int frames = r.uniform_int((target_frames + 1) / 2, target_frames);
    std::vector<ScriptEntry> script;
    int left = frames;
    while (left > 0) {
      ScriptEntry e;
      e.label = r.uniform_int(1, cfg.num_labels - 1);
      e.frames =
          std::min(left, r.uniform_int(cfg.min_unit_frames,
                                       cfg.max_unit_frames));
      script.push_back(e);
      left -= e.frames;
    }
    utts.push_back(synth_utterance(
        profiles[std::size_t(speakers[std::size_t(s)])], script,
        child_seed(c, fnv1a64("utt"), std::uint64_t(s)), cfg.features));
  }

  if (cfg.num_sources == 1)
    return single_sample(utts[0], plan, cfg.num_labels);

  std::vector<double> snrs;
  if (cfg.num_sources == 2) {
    snrs.push_back(cfg.snr_grid_db[index % cfg.snr_grid_db.size()]);
  } else if (split == Split::kTest) {
    snrs.assign(std::size_t(cfg.num_sources - 1), 0.0);  // equal energy
  } else {
    double lo = *std::min_element(cfg.snr_grid_db.begin(),
                                  cfg.snr_grid_db.end());
    double hi = *std::max_element(cfg.snr_grid_db.begin(),
                                  cfg.snr_grid_db.end());
    for (int s = 1; s < cfg.num_sources; ++s)
      snrs.push_back(r.uniform(lo, hi));
  }
  return make_mixture(utts, snrs, child_seed(c, fnv1a64("mix"), 0), plan,
                      cfg.num_labels);
}

}  // namespace

DatasetManifest generate_dataset(const DatasetConfig& cfg, Split split,
                                 const std::string& out_dir, int jobs) {
  validate(cfg);
  dsp::validate(cfg.features);
  const std::vector<int> pool = speaker_pool(cfg, split);
  PITMIX_CHECK(int(pool.size()) >= cfg.num_sources,
               "split speaker pool smaller than num_sources");

  std::vector<SpeakerProfile> profiles;
  profiles.reserve(std::size_t(cfg.num_speakers));
  for (int id = 0; id < cfg.num_speakers; ++id)
    profiles.push_back(make_speaker(id, cfg.num_labels, cfg.seed));

  const dsp::StftPlan plan(cfg.features);
  std::size_t count = 0;
  switch (split) {
    case Split::kTrain:
      count = std::size_t(cfg.num_mixtures);
      break;
    case Split::kValid:
      count = std::size_t(cfg.num_valid_mixtures);
      break;
    case Split::kTest:
      count = std::size_t(cfg.num_test_mixtures);
      break;
  }

  std::vector<MixtureSample> samples(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    samples[i] = generate_one(cfg, split, i, profiles, pool, plan);
  });

  std::filesystem::create_directories(out_dir);
  const std::string bin_name = split_name(split) + ".bin";
  const std::filesystem::path bin_path =
      std::filesystem::path(out_dir) / bin_name;
  std::ofstream os(bin_path, std::ios::binary);
  PITMIX_CHECK(os.good(), "cannot open " + bin_path.string());

  DatasetManifest manifest;
  manifest.fingerprint = dataset_fingerprint(cfg);
  for (const MixtureSample& sample : samples) {
    ManifestRecord rec;
    rec.file = bin_name;
    rec.offset = std::uint64_t(os.tellp());
    rec.num_sources = sample.sources();
    rec.frames = int(sample.frames());
    rec.snr_db = sample.snr_db;
    rec.speaker_ids = sample.speaker_ids;
    write_sample(os, sample);
    manifest.records.push_back(std::move(rec));
  }
  os.close();
  write_manifest(
      (std::filesystem::path(out_dir) / (split_name(split) + ".manifest"))
          .string(),
      manifest);
  return manifest;
}

std::vector<MixtureSample> load_dataset(const std::string& manifest_path) {
  DatasetManifest manifest = read_manifest(manifest_path);
  const std::filesystem::path dir =
      std::filesystem::path(manifest_path).parent_path();
  std::vector<MixtureSample> samples;
  samples.reserve(manifest.records.size());
  std::string open_name;
  std::ifstream is;
  for (const ManifestRecord& rec : manifest.records) {
    if (rec.file != open_name) {
      is.close();
      is.clear();
      is.open(dir / rec.file, std::ios::binary);
      PITMIX_CHECK(is.good(), "cannot open sample file: " + rec.file);
      open_name = rec.file;
    }
    is.seekg(std::streamoff(rec.offset));
    PITMIX_CHECK(is.good(), "bad offset in manifest");
    samples.push_back(read_sample(is));
    PITMIX_CHECK(samples.back().sources() == rec.num_sources &&
                     int(samples.back().frames()) == rec.frames,
                 "sample does not match its manifest record");
  }
  return samples;
}

}  // namespace pitmix::corpus
