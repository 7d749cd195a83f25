#include "gtvd/diagnostics.hpp"

#include <algorithm>
#include <ostream>

namespace gtvd {

void DiagnosticsReport::set(std::string key, std::string value) {
  auto it = std::find_if(meta.begin(), meta.end(), [&](const auto& kv) { return kv.first == key; });
  if (it != meta.end()) {
    it->second = std::move(value);
  } else {
    meta.emplace_back(std::move(key), std::move(value));
  }
}

void write_diagnostics(std::ostream& out, const DiagnosticsReport& r) {
  const auto old_precision = out.precision(10);
  for (const auto& [k, v] : r.meta) out << k << ": " << v << '\n';
  out << "outer_iterations: " << r.outer_iterations << '\n'
      << "outer_converged: " << (r.outer_converged ? "true" : "false") << '\n'
      << "final_relative_change: " << r.final_relative_change << '\n'
      << "no_support_pair_nodes: " << r.no_support_pair_nodes << '\n'
      << "windows: " << r.windows << '\n'
      << "seconds: " << r.seconds << '\n';
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';

  out << "\n[passes]\n"
      << "pass,outer,window,color,nodes,edges,no_support_pair,admm_iterations,admm_converged,"
         "initial_residual,final_residual,final_dual_residual,objective,gtv,cg_not_converged,"
         "prox_not_converged,seconds\n";
  for (const auto& p : r.passes) {
    out << p.pass << ',' << p.outer << ',' << p.window << ',' << color_name(p.color) << ',' << p.nodes
        << ',' << p.edges << ',' << p.no_support_pair << ',' << p.admm_iterations << ','
        << (p.admm_converged ? 1 : 0) << ',' << p.initial_residual << ',' << p.final_residual << ','
        << p.final_dual_residual << ',' << p.objective << ',' << p.gtv << ',' << p.cg_not_converged << ',' << p.prox_not_converged
        << ',' << p.seconds << '\n';
  }

  out << "\n[iterations]\npass,iteration,primal_residual,objective,gtv,seconds\n";
  for (const auto& it : r.iterations) {
    out << it.pass << ',' << it.iteration << ',' << it.primal_residual << ',' << it.objective << ','
        << it.gtv << ',' << it.seconds << '\n';
  }
  out.precision(old_precision);
}

}  // namespace gtvd
