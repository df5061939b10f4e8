use std::collections::BTreeMap;

use approx::assert_relative_eq;
use microgrid_core::scenario::*;
use microgrid_core::sources::WindMg;
use microgrid_core::{energy_audit, run, Scenario, SimConfig};
use proptest::prelude::*;

fn wind(id: &str) -> SourceSpec {
    SourceSpec::WindMg(WindSource {
        id: id.into(),
        generator: WindMg {
            k_e: 0.24,
            r_a: 0.01,
            k_w: 10.0,
            tau: 0.0,
        },
        wind_speed: Signal::Const(10.0),
        omega_init: None,
    })
}

fn buck(id: &str, source: &str, r_nom: f64) -> ConverterSpec {
    ConverterSpec::Buck(SourceConverter {
        id: id.into(),
        source: source.into(),
        l: 0.02,
        c: 1e-5,
        r_nom,
        r_series: 0.0,
        i_l_init: 0.0,
        rated_power: Some(200.0),
        diode_rating: 30.0,
        control: ControlSpec::VoltagePi {
            k_p: 15.0,
            k_i: 0.002,
            v_ref: None,
            feedforward: true,
            anti_windup: true,
            duty_min: 0.0,
            duty_max: 1.0,
        },
    })
}

fn resistive(id: &str, r: f64) -> LoadSpec {
    LoadSpec::Resistive(ResistiveLoad {
        id: id.into(),
        r: Signal::Const(r),
    })
}

fn bus(v_ref: f64, v_init: f64) -> BusSpec {
    BusSpec {
        v_ref,
        c_bus: 1e-5,
        v_init: Some(v_init),
        r_port: 0.0,
        diode_drop: 0.0,
    }
}

fn sim(dt: f64, t_end: f64, log_every: u64) -> SimConfig {
    SimConfig { dt, t_end, log_every }
}

fn parallel_bucks() -> Scenario {
    Scenario {
        sources: vec![wind("w1"), wind("w2")],
        converters: vec![buck("b1", "w1", 3.0), buck("b2", "w2", 3.0)],
        battery: None,
        loads: vec![resistive("load", 1.5)],
        bus: bus(12.0, 0.0),
        profiles: BTreeMap::new(),
        sim: sim(1e-5, 0.3, 100),
    }
}

#[test]
fn identical_sources_share_equally() {
    let sc = parallel_bucks();
    sc.validate().unwrap();
    let tr = run(&sc).unwrap();
    let p1 = tr.last("b1.p_out").unwrap();
    let p2 = tr.last("b2.p_out").unwrap();
    let total = p1 + p2;
    assert_relative_eq!(tr.last("bus.v").unwrap(), 12.0, max_relative = 5e-3);
    assert!((p1 / total - 0.5).abs() < 5e-3, "{p1} vs {p2}");
    assert_relative_eq!(total, 12.0 * 12.0 / 1.5, max_relative = 1e-2);
}

#[test]
fn port_diodes_never_conduct_backwards() {
    let mut sc = parallel_bucks();
    // the second source is weaker and cannot reach the bus voltage
    if let SourceSpec::WindMg(w) = &mut sc.sources[1] {
        w.wind_speed = Signal::Const(3.0);
    }
    sc.sim.log_every = 1;
    sc.validate().unwrap();
    let tr = run(&sc).unwrap();
    for sig in ["b1.i_out", "b2.i_out"] {
        assert!(tr.column(sig).unwrap().iter().all(|i| *i >= 0.0), "{sig}");
    }
    assert_relative_eq!(tr.last("bus.v").unwrap(), 12.0, max_relative = 5e-3);
    assert!(tr.last("b1.p_out").unwrap() > tr.last("b2.p_out").unwrap());
}

#[test]
fn battery_alone_supplies_the_load() {
    let sc = Scenario {
        sources: vec![],
        converters: vec![ConverterSpec::Bidirectional(BidirectionalConverter {
            id: "bdc".into(),
            source: BATTERY_ID.into(),
            l: 1e-3,
            c: 1e-3,
            r_nom: 10.0,
            r_series: 0.0,
            band: None,
            v_ref: None,
            i_charge_max: 20.0,
            i_discharge_max: 20.0,
            k_p: 2.0,
            k_i: 50.0,
            current_k_p: 0.1,
            current_k_i: 20.0,
            rated_power: None,
        })],
        battery: Some(BatterySpec {
            capacity_ah: 10.0,
            soc: 0.6,
            v_full: 28.0,
            v_empty: 22.0,
            r_int: 0.0,
            soc_min: 0.2,
            soc_max: 1.0,
            reentry_margin: 0.02,
        }),
        loads: vec![resistive("load", 24.0)],
        bus: BusSpec {
            v_ref: 48.0,
            c_bus: 1e-3,
            v_init: None,
            r_port: 0.0,
            diode_drop: 0.0,
        },
        profiles: BTreeMap::new(),
        sim: sim(1e-5, 1.0, 100),
    };
    sc.validate().unwrap();
    let tr = run(&sc).unwrap();
    let a = energy_audit(&tr);
    assert_eq!(a.source, 0.0);
    assert!(a.battery < 0.0);
    // every joule on the load came out of the battery or the capacitors
    assert_relative_eq!(-a.battery - a.stored_delta - a.clamp, a.load, max_relative = 1e-6);
    assert!(tr.last("battery.soc").unwrap() < 0.6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lossless_balance_holds(r_load in 1.0f64..6.0, wind_speed in 8.0f64..14.0, v_init in 0.0f64..12.0) {
        let mut sc = Scenario {
            sources: vec![wind("w")],
            converters: vec![buck("b", "w", r_load)],
            battery: None,
            loads: vec![resistive("load", r_load)],
            bus: bus(12.0, v_init),
            profiles: BTreeMap::new(),
            sim: sim(1e-5, 0.05, 50),
        };
        if let SourceSpec::WindMg(w) = &mut sc.sources[0] {
            w.wind_speed = Signal::Const(wind_speed);
        }
        sc.validate().unwrap();
        let a = energy_audit(&run(&sc).unwrap());
        prop_assert!(a.relative < 1e-6, "{:?}", a);
    }

    #[test]
    fn soc_and_bus_stay_physical(r_load in 8.0f64..60.0, soc in 0.25f64..0.95) {
        let sc = Scenario {
            sources: vec![],
            converters: vec![ConverterSpec::Bidirectional(BidirectionalConverter {
                id: "bdc".into(),
                source: BATTERY_ID.into(),
                l: 1e-3,
                c: 1e-3,
                r_nom: 10.0,
                r_series: 0.0,
                band: None,
                v_ref: None,
                i_charge_max: 20.0,
                i_discharge_max: 20.0,
                k_p: 2.0,
                k_i: 50.0,
                current_k_p: 0.1,
                current_k_i: 20.0,
                rated_power: None,
            })],
            battery: Some(BatterySpec {
                capacity_ah: 0.005,
                soc,
                v_full: 28.0,
                v_empty: 22.0,
                r_int: 0.02,
                soc_min: 0.2,
                soc_max: 1.0,
                reentry_margin: 0.02,
            }),
            loads: vec![resistive("load", r_load)],
            bus: BusSpec { v_ref: 48.0, c_bus: 1e-3, v_init: None, r_port: 0.0, diode_drop: 0.0 },
            profiles: BTreeMap::new(),
            sim: sim(5e-5, 0.5, 20),
        };
        sc.validate().unwrap();
        let tr = run(&sc).unwrap();
        for s in tr.column("battery.soc").unwrap() {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        for v in tr.column("bus.v").unwrap() {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}
