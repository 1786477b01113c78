#include "caag/model.hpp"

namespace caag::model {

Model::Model(Dims d)
    : dims(d),
      embed("embed", d.vocab, d.d_e),
      lstm_attn("lstm_attn", d.d_e + d.d_h + d.d_i, d.d_h),
      att_visual("att_visual", d.d_a, d.d_i, d.d_h),
      lstm_lang("lstm_lang", d.d_i + d.d_h, d.d_h),
      out_primary("out_primary", d.vocab, d.d_h),
      att_semantic("att_semantic", d.d_a, d.d_e, d.d_h),
      lstm_aux("lstm_aux", d.d_e + d.d_h, d.d_h),
      out_aux("out_aux", d.vocab, d.d_h) {
  if (d.vocab == 0) throw Error("model: vocabulary size must be positive");
}

void Model::init_primary(Rng& rng) {
  embed.init(rng);
  lstm_attn.init(rng);
  att_visual.init(rng);
  lstm_lang.init(rng);
  out_primary.init(rng);
}

void Model::init_aux(Rng& rng) {
  att_semantic.init(rng);
  lstm_aux.init(rng);
  out_aux.init(rng);
}

std::vector<diff::Parameter*> Model::primary_params() {
  std::vector<diff::Parameter*> out = {&embed.table};
  for (auto* p : lstm_attn.params()) out.push_back(p);
  for (auto* p : att_visual.params()) out.push_back(p);
  for (auto* p : lstm_lang.params()) out.push_back(p);
  for (auto* p : out_primary.params()) out.push_back(p);
  return out;
}

std::vector<diff::Parameter*> Model::aux_params() {
  std::vector<diff::Parameter*> out;
  for (auto* p : att_semantic.params()) out.push_back(p);
  for (auto* p : lstm_aux.params()) out.push_back(p);
  for (auto* p : out_aux.params()) out.push_back(p);
  return out;
}

std::vector<diff::Parameter*> Model::all_params() {
  auto out = primary_params();
  for (auto* p : aux_params()) out.push_back(p);
  return out;
}

}  // namespace caag::model
