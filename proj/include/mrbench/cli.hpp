#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mrb {

// mrbench <command> ...; args exclude the program name. Returns the exit
// code. Errors go to `err` as one line.
//
//   gen     --out DATASET
//   mask    --dataset DATASET --out MASKED
//   recon   --masked MASKED --track T --phase P --method M --out SUBMISSION
//   score   --dataset DATASET --submission SUBMISSION --out DIR
//   serve   --dataset DATASET --root SERVICE_ROOT [--port N] [--port-file F]
//   submit  --server URL --token TOKEN --submission SUBMISSION
//   close   --server URL --token TOKEN [--at TIME]
//   study plan      --dataset DATASET --root SERVICE_ROOT --track T
//   study aggregate --root SERVICE_ROOT --track T --out DIR
//   study export    --dataset DATASET --root SERVICE_ROOT --track T --out DIR
//   report  (--root SERVICE_ROOT | --fixture) --out DIR
//
// Common flags: --config, --seed, --jobs, --force.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace mrb
