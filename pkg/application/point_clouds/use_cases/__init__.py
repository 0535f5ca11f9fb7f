from application.point_clouds.use_cases.annotate_cloud_file import annotate_cloud_file

__all__ = ["annotate_cloud_file"]
