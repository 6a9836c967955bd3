#pragma once

#include <map>
#include <string>
#include <vector>

#include "favc/dataset.hpp"
#include "favc/dsp.hpp"

namespace favc::svg {

// Minimal self-contained SVG writer; all figures render without external
// assets. Every figure embeds the run's config hash and seed as a comment.

std::string color_map(double t);  // t in [0,1] -> #rrggbb (viridis-like)

// One panel per target channel, true and generated traces overlaid.
std::string waveform_overlay(const std::vector<double>& truth,
                             const std::vector<double>& pred, int samples,
                             double fs, const std::vector<std::string>& names,
                             const std::string& title, const std::string& note);

// Channel x frequency log-PSD heatmaps, truth and prediction side by side on
// a shared color scale.
std::string heatmap_pair(const dsp::PsdEstimate& truth,
                         const dsp::PsdEstimate& pred, const std::string& title,
                         const std::string& note);

// Radial-basis shaded scalp bandpower maps for several methods, one shared
// color scale across all panels.
std::string scalp_maps(const std::vector<std::string>& method_names,
                       const std::vector<std::vector<double>>& bandpower_13,
                       const Montage& montage, const std::string& title,
                       const std::string& note);

// Grouped bar chart (methods x metric value) used by the robustness report.
std::string bar_chart(const std::vector<std::string>& groups,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series,
                      const std::string& title, const std::string& note);

// Metric-versus-weight line chart for the PSD-weight sweep.
std::string line_chart(const std::vector<double>& xs,
                       const std::vector<std::pair<std::string, std::vector<double>>>& series,
                       const std::string& x_label, const std::string& title,
                       const std::string& note);

}  // namespace favc::svg
