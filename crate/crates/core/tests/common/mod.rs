//! Fixtures shared by the integration tests.

use std::fmt::Write as _;
use std::path::Path;

/// Twenty-four stations across the Piemonte region (lat/lon), four daily
/// attributes, a few missing days and one repeated row.
pub fn write_piemonte_fixture(dir: &Path, days: usize) {
    let mut stations = String::from("cell_id,lat,lon\n");
    for i in 0..24 {
        let lat = 44.2 + 0.09 * (i % 6) as f64 + 0.013 * i as f64;
        let lon = 7.1 + 0.33 * (i / 6) as f64 + 0.021 * (i % 5) as f64;
        writeln!(stations, "{i},{lat},{lon}").unwrap();
    }
    std::fs::write(dir.join("stations.csv"), stations).unwrap();

    let attrs = ["PM10", "WS", "TEMP", "EMI"];
    let mut m = String::from("cycle,cell_id,attribute,value\n");
    for y in 0..days {
        for x in 0..24 {
            for (a, name) in attrs.iter().enumerate() {
                let missing = (x == 3 && a == 0 && (y == 4 || y == 5)) || (x == 17 && a == 2 && y == 9);
                let v = 10.0 * (a + 1) as f64 + ((x * 7 + y * 3 + a) % 11) as f64 * 0.5;
                if missing {
                    writeln!(m, "{y},{x},{name},NA").unwrap();
                } else {
                    writeln!(m, "{y},{x},{name},{v}").unwrap();
                }
            }
        }
    }
    // A repeated reading; the later one wins.
    writeln!(m, "2,0,PM10,99.5").unwrap();
    std::fs::write(dir.join("measurements.csv"), m).unwrap();
}
