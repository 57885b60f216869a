#![no_main]

use armctl_kinematics::RobotModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = RobotModel::from_toml_str(text) {
            // anything that parses must also pass validation
            assert!(model.validate().is_ok());
        }
    }
});
