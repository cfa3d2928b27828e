#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "mrsi/hlsvd.hpp"
#include "mrsi/lipid_l2.hpp"
#include "mrsi/lowrank.hpp"
#include "mrsi/metrics.hpp"
#include "mrsi/simgen.hpp"
#include "mrsi/volume_io.hpp"
#include "mrsi/ynet.hpp"

namespace py = pybind11;
using namespace mrsi;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

Spectrum spectrum_from(const CArray& a, const SpectralAxis& axis, Domain d)
{
    if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != axis.n_points())
        throw AxisMismatchError("expected a 1-D array of " + std::to_string(axis.n_points()) + " samples");
    return Spectrum(axis, d, Eigen::Map<const CVector>(a.data(), a.shape(0)));
}

CArray to_array(const CVector& v)
{
    CArray out(v.size());
    std::copy(v.data(), v.data() + v.size(), out.mutable_data());
    return out;
}

// (nx, ny, N) view of the FID block; copies both ways.
CArray get_fids(const MrsiVolume& v)
{
    CArray out({v.nx(), v.ny(), v.axis().n_points()});
    std::copy(v.fids().data(), v.fids().data() + v.fids().size(), out.mutable_data());
    return out;
}

void set_fids(MrsiVolume& v, const CArray& a)
{
    if (a.ndim() != 3 || static_cast<std::size_t>(a.shape(0)) != v.nx() ||
        static_cast<std::size_t>(a.shape(1)) != v.ny() || static_cast<std::size_t>(a.shape(2)) != v.axis().n_points())
        throw AxisMismatchError("fids must have shape (nx, ny, n_points)");
    std::copy(a.data(), a.data() + a.size(), v.fids().data());
}

template <typename T>
py::array_t<T> grid(const MrsiVolume& v, const std::vector<T>& flat)
{
    if (flat.empty())
        return py::array_t<T>(std::vector<py::ssize_t>{0, 0});
    py::array_t<T> out({v.nx(), v.ny()});
    std::copy(flat.begin(), flat.end(), out.mutable_data());
    return out;
}

template <typename T>
void set_grid(const MrsiVolume& v, std::vector<T>& flat, const py::array_t<T, py::array::c_style | py::array::forcecast>& a)
{
    if (a.size() == 0) {
        flat.clear();
        return;
    }
    if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(0)) != v.nx() || static_cast<std::size_t>(a.shape(1)) != v.ny())
        throw AxisMismatchError("map must have shape (nx, ny)");
    flat.assign(a.data(), a.data() + a.size());
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Water and lipid removal for MRSI spectra";

    auto base = py::register_exception<Error>(m, "MrsiError");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    auto data = py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", data.ptr());

    py::class_<SpectralAxis>(m, "SpectralAxis")
        .def(py::init<std::size_t, double, double, double>(), py::arg("n_points"), py::arg("bandwidth_hz"),
             py::arg("transmitter_mhz") = 297.22, py::arg("ref_ppm") = 4.7)
        .def_property_readonly("n_points", &SpectralAxis::n_points)
        .def_property_readonly("bandwidth_hz", &SpectralAxis::bandwidth_hz)
        .def_property_readonly("transmitter_mhz", &SpectralAxis::transmitter_mhz)
        .def_property_readonly("ref_ppm", &SpectralAxis::ref_ppm)
        .def("ppm", [](const SpectralAxis& ax) {
            py::array_t<double> out(ax.n_points());
            for (std::size_t k = 0; k < ax.n_points(); ++k)
                out.mutable_at(k) = ax.index_to_ppm(static_cast<double>(k));
            return out;
        }, "Chemical shift of every frequency bin.")
        .def("ppm_to_index", &SpectralAxis::ppm_to_index)
        .def("__eq__", [](const SpectralAxis& a, const SpectralAxis& b) { return a == b; })
        .def("__repr__", [](const SpectralAxis& a) {
            return "SpectralAxis(" + std::to_string(a.n_points()) + ", " + std::to_string(a.bandwidth_hz()) + ")";
        });

    m.def("to_frequency", [](const CArray& fid, const SpectralAxis& ax) {
        return to_array(to_frequency(spectrum_from(fid, ax, Domain::Time)).samples);
    }, py::arg("fid"), py::arg("axis"));
    m.def("to_time", [](const CArray& spec, const SpectralAxis& ax) {
        return to_array(to_time(spectrum_from(spec, ax, Domain::Frequency)).samples);
    }, py::arg("spectrum"), py::arg("axis"));

    py::class_<MrsiVolume>(m, "Volume")
        .def(py::init<std::size_t, std::size_t, SpectralAxis>(), py::arg("nx"), py::arg("ny"), py::arg("axis"))
        .def_property_readonly("nx", &MrsiVolume::nx)
        .def_property_readonly("ny", &MrsiVolume::ny)
        .def_property_readonly("axis", &MrsiVolume::axis)
        .def_property("fids", &get_fids, &set_fids, "Time-domain FIDs, shape (nx, ny, n_points).")
        .def_property(
            "brain_mask", [](const MrsiVolume& v) { return grid(v, v.brain_mask()); },
            [](MrsiVolume& v, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
                set_grid(v, v.brain_mask(), a);
            })
        .def_property(
            "scalp_mask", [](const MrsiVolume& v) { return grid(v, v.scalp_mask()); },
            [](MrsiVolume& v, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
                set_grid(v, v.scalp_mask(), a);
            })
        .def_property(
            "b0_map_hz", [](const MrsiVolume& v) { return grid(v, v.b0_map_hz()); },
            [](MrsiVolume& v, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
                set_grid(v, v.b0_map_hz(), a);
            })
        .def("brain_voxels", &MrsiVolume::brain_voxels)
        .def("scalp_voxels", &MrsiVolume::scalp_voxels);

    m.def("read_volume", py::overload_cast<const std::filesystem::path&>(&read_volume), py::arg("path"));
    m.def("write_volume", py::overload_cast<const MrsiVolume&, const std::filesystem::path&>(&write_volume),
          py::arg("volume"), py::arg("path"));
    m.def("b0_correct", &b0_correct, py::arg("volume"));
    m.def("encode_and_reconstruct", py::overload_cast<const MrsiVolume&>(&sim::encode_and_reconstruct),
          py::arg("volume"), "Hamming-apodized k-space round trip.");

    m.def("build_phantom", [](std::size_t nx, std::size_t ny, std::size_t points, double bandwidth, double snr,
                              bool lipid_bleed, std::uint64_t seed) {
        sim::PhantomConfig c;
        c.nx = nx;
        c.ny = ny;
        c.axis = SpectralAxis(points, bandwidth);
        c.snr = snr;
        c.lipid_bleed = lipid_bleed;
        c.seed = seed;
        auto ph = sim::build_phantom(c);
        py::dict out;
        out["measured"] = std::move(ph.measured);
        out["metabolite"] = std::move(ph.metabolite);
        out["lipid"] = std::move(ph.lipid);
        out["water"] = std::move(ph.water);
        return out;
    }, py::arg("nx") = 32, py::arg("ny") = 32, py::arg("points") = 512, py::arg("bandwidth") = 4000.0,
       py::arg("snr") = 20.0, py::arg("lipid_bleed") = true, py::arg("seed") = 1);

    py::class_<hlsvd::Component>(m, "Component")
        .def_readonly("frequency_hz", &hlsvd::Component::frequency_hz)
        .def_readonly("damping_per_s", &hlsvd::Component::damping_per_s)
        .def_readonly("amplitude", &hlsvd::Component::amplitude)
        .def_readonly("phase_rad", &hlsvd::Component::phase_rad)
        .def_readonly("growing", &hlsvd::Component::growing);

    m.def("hlsvd_decompose", [](const CArray& fid, const SpectralAxis& ax, std::size_t rank) {
        return hlsvd::decompose(spectrum_from(fid, ax, Domain::Time), rank);
    }, py::arg("fid"), py::arg("axis"), py::arg("rank"));
    m.def("remove_water", [](const CArray& fid, const SpectralAxis& ax, std::size_t rank, std::pair<double, double> band) {
        return to_array(hlsvd::remove_water(spectrum_from(fid, ax, Domain::Time), rank, {band.first, band.second}).samples);
    }, py::arg("fid"), py::arg("axis"), py::arg("rank") = hlsvd::kDefaultRank,
       py::arg("band") = std::pair{hlsvd::kWaterBand.lo, hlsvd::kWaterBand.hi});

    py::class_<lipid::LipidOperator>(m, "LipidOperator")
        .def_property_readonly("beta", &lipid::LipidOperator::beta)
        .def_property_readonly("rank", &lipid::LipidOperator::rank)
        .def_property_readonly("eigvals", &lipid::LipidOperator::eigvals)
        .def_property_readonly("axis", &lipid::LipidOperator::axis)
        .def("with_beta", &lipid::LipidOperator::with_beta)
        .def("mean_abs_diag", py::overload_cast<const lipid::LipidOperator&>(&lipid::mean_abs_diag))
        .def("dense", &lipid::LipidOperator::dense)
        .def("apply", [](const lipid::LipidOperator& op, const CArray& s) {
            return to_array(lipid::apply(op, spectrum_from(s, op.axis(), Domain::Frequency)).samples);
        }, py::arg("spectrum"))
        .def("project_lipid", [](const lipid::LipidOperator& op, const CArray& s) {
            return to_array(lipid::project_lipid(op, spectrum_from(s, op.axis(), Domain::Frequency)).samples);
        }, py::arg("spectrum"))
        .def("save", [](const lipid::LipidOperator& op, const std::filesystem::path& p) { lipid::save_operator(op, p); });

    m.def("lipid_operator", [](const std::vector<CArray>& spectra, const SpectralAxis& ax, std::optional<double> beta,
                               double target) {
        std::vector<Spectrum> cols;
        for (const auto& s : spectra)
            cols.push_back(spectrum_from(s, ax, Domain::Frequency));
        const auto op = lipid::build_operator(lipid::build_basis(cols), 0.0);
        return op.with_beta(beta ? *beta : lipid::calibrate_beta(op, target).beta);
    }, py::arg("spectra"), py::arg("axis"), py::arg("beta") = py::none(), py::arg("target") = lipid::kDefaultTarget,
       "Operator from frequency-domain lipid spectra; beta calibrated to `target` unless given.");
    m.def("lipid_operator_from_volume", &lipid::build_calibrated, py::arg("volume"),
          py::arg("target") = lipid::kDefaultTarget);
    m.def("load_operator", &lipid::load_operator, py::arg("path"), py::arg("axis"));

    m.def("lowrank_denoise", &lowrank::denoise, py::arg("volume"), py::arg("rank") = lowrank::kDefaultRank);

    py::class_<ynet::YNetWeights<float>>(m, "Weights")
        .def_property_readonly("n_parameters", &ynet::YNetWeights<float>::size)
        .def_property_readonly("padded_length", [](const ynet::YNetWeights<float>& w) { return w.config().padded_length; })
        .def_property_readonly("mode", [](const ynet::YNetWeights<float>& w) { return sim::to_string(w.config().mode); });
    m.def("load_weights", [](const std::filesystem::path& p) { return ynet::load_weights(p); }, py::arg("path"));

    m.def("remove", [](const std::string& method, const MrsiVolume& v, const lipid::LipidOperator* op,
                       const ynet::YNetWeights<float>* weights, std::size_t threads) {
        const auto mth = metrics::parse_method(method);
        metrics::MethodContext ctx;
        ctx.op = op;
        ctx.threads = threads;
        if (mth == metrics::Method::Walinet)
            ctx.walinet = weights;
        else
            ctx.lipnet = weights;
        return metrics::remove(mth, v, ctx);
    }, py::arg("method"), py::arg("volume"), py::arg("op") = nullptr, py::arg("weights") = nullptr,
       py::arg("threads") = 1);

    m.def("nrmse", [](const CArray& pred, const CArray& truth, const SpectralAxis& ax, std::pair<double, double> band) {
        return metrics::nrmse(spectrum_from(pred, ax, Domain::Frequency), spectrum_from(truth, ax, Domain::Frequency),
                              {band.first, band.second});
    }, py::arg("pred"), py::arg("truth"), py::arg("axis"), py::arg("band") = std::pair{4.2, 1.9});
    m.def("residual_map", [](const MrsiVolume& v, std::pair<double, double> band) {
        return grid(v, metrics::residual_map(v, {band.first, band.second}));
    }, py::arg("volume"), py::arg("band"));
}
