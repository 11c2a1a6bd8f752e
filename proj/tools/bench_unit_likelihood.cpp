// Times the per-unit state likelihood fan-out: serial reference vs the
// OpenMP path that spreads the C candidate states across threads.

#include <chrono>
#include <cstdio>

#include "mtlvm/sampler.hpp"
#include "mtlvm/synth.hpp"

using Clock = std::chrono::steady_clock;

int main() {
  mtlvm::synth::SynthConfig sc;
  sc.num_states = 8;
  sc.vocab_size = 200;
  sc.num_entities = 20;
  sc.num_epochs = 6;
  sc.docs_per_unit = 4;
  sc.tokens_per_doc = 40;
  sc.separation = true;
  mtlvm::Rng rng(7);
  auto [corpus, truth] = mtlvm::synth::generate(sc, rng);

  mtlvm::sampler::Hyperparams hp;
  hp.num_states = 8;
  hp.sweeps = 5;
  hp.burn_in = 1;
  hp.seed = 7;
  auto model = mtlvm::sampler::train(corpus, hp);
  auto& seating = model.seating_mutable();

  const int reps = 20;
  double serial_ms = 0.0, parallel_ms = 0.0;
  double checksum_serial = 0.0, checksum_parallel = 0.0;

  for (int u = 0; u < model.num_units(); ++u) {
    const auto& docs = model.unit_documents(u);
    int state = model.unit_state(u);
    seating.detach_unit(docs, state);

    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r)
      for (double x : seating.unit_log_likelihood_all(docs, false))
        checksum_serial += x;
    auto t1 = Clock::now();
    for (int r = 0; r < reps; ++r)
      for (double x : seating.unit_log_likelihood_all(docs, true))
        checksum_parallel += x;
    auto t2 = Clock::now();

    seating.attach_unit(docs, state, model.rng());
    serial_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    parallel_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
  }

  std::printf("serial   %8.2f ms  checksum %.6f\n", serial_ms, checksum_serial);
  std::printf("parallel %8.2f ms  checksum %.6f\n", parallel_ms,
              checksum_parallel);
  std::printf("match    %s\n",
              checksum_serial == checksum_parallel ? "yes" : "NO");
  return checksum_serial == checksum_parallel ? 0 : 1;
}
