import numpy as np

from application.point_clouds.services import SurfaceEstimator, load_cloud, save_cloud
from application.point_clouds.use_cases import annotate_cloud_file


class TestAnnotateCloudFile:
    def test_writes_normals_and_variations(self, tmp_path, scene):
        save_cloud(scene, tmp_path / "in.ply")
        count = annotate_cloud_file(SurfaceEstimator(k=10), tmp_path / "in.ply", tmp_path / "out.ply")

        annotated = load_cloud(tmp_path / "out.ply")
        assert count == len(scene)
        assert annotated.is_annotated
        np.testing.assert_allclose(annotated.points, scene.points, atol=1e-12)

    def test_voxel_downsampling(self, tmp_path, scene):
        save_cloud(scene, tmp_path / "in.xyz")
        count = annotate_cloud_file(
            SurfaceEstimator(k=10), tmp_path / "in.xyz", tmp_path / "out.ply", voxel_size=0.1
        )
        assert count < len(scene)
